//! Analog codebook dumps, one row per matrix entry.
//!
//! Columns: `codeword,antenna,rf_chain,re,im`. Codewords keep their
//! `<antennas>x<rf>/<index>` ids, so a dump of every codebook scenario can be
//! concatenated and still split apart.

use std::path::Path;

use crate::beamforming::AnalogBeamformer;
use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

pub const HEADER: [&str; 5] = ["codeword", "antenna", "rf_chain", "re", "im"];

pub fn codebook_csv_string<T: Real>(codebook: &[AnalogBeamformer<T>]) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for cw in codebook {
        for c in 0..cw.matrix.ncols() {
            for a in 0..cw.matrix.nrows() {
                let z = cw.matrix[(a, c)];
                out.push_str(&format!(
                    "{},{a},{c},{},{}\n",
                    cw.codebook_id,
                    to_f64(z.re),
                    to_f64(z.im)
                ));
            }
        }
    }
    out
}

pub fn write_codebook_csv<T: Real>(codebook: &[AnalogBeamformer<T>], path: &Path) -> Result<()> {
    std::fs::write(path, codebook_csv_string(codebook)).map_err(|e| Error::io(path, e))
}
