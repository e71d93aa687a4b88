//! Link-level simulator for IRS-aided indoor mmWave MU-MIMO-OFDM.
//!
//! The pipeline runs channel synthesis, hybrid analog/digital beamforming,
//! IRS phase optimization with a Riemannian conjugate gradient on the unit
//! circle, SINR and rate evaluation, the three delay components, and the
//! delay/routing utility. [`experiment`] sweeps the pipeline over codebook
//! scenarios and IRS sizes and [`io`] exports plot-ready tables.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases below name the usual concrete instantiations.
//!
//! ```
//! use irsvr::{Scenario, alternating_optimize};
//!
//! let mut scenario = Scenario::<f64>::default_indoor();
//! scenario.params.n_sc = 4;
//! scenario.optimizer.max_rounds = 2;
//! let outcome = alternating_optimize(&scenario).unwrap();
//! assert!(outcome.trace.rounds.len() >= 1);
//! ```

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod association;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod ops;
pub mod optimizer;
pub mod pipeline;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use optimizer::ao::{alternating_optimize, AoOutcome, AoTrace};
pub use scalar::Real;
pub use scenario::{load_scenario, CodebookScenario, Scenario, ScenarioDocument};

pub type ScenarioF64 = scenario::Scenario<f64>;
pub type ScenarioF32 = scenario::Scenario<f32>;
pub type ChannelTensorF64 = channel::ChannelTensor<f64>;
pub type ChannelSetF64 = channel::ChannelSet<f64>;
pub type PhaseShiftMatrixF64 = channel::PhaseShiftMatrix<f64>;
pub type BeamformerSetF64 = beamforming::BeamformerSet<f64>;
pub type UtilityReportF64 = metrics::UtilityReport<f64>;
pub type AoOutcomeF64 = optimizer::ao::AoOutcome<f64>;
