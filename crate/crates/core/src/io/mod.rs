//! File formats: external SNR traces, result tables and codebook dumps.

pub mod codebook_io;
pub mod export;
pub mod snr_csv;

pub use export::{export_results, ExportOptions, SCHEMA_VERSION};
pub use snr_csv::{export_snr_csv, import_ns3_snr_csv, parse_snr_csv, ExternalSnrTrace, SnrRow};
