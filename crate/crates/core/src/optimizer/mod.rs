//! IRS phase optimization and the alternating beamforming/phase loop.

pub mod ao;
pub mod complexity;
pub mod objective;
pub mod rcg;

pub use ao::{alternating_optimize, single_pass, AoOptions, AoOutcome, AoRound, AoTrace};
pub use objective::{rate_gradient_wrt_phases, DlProblem, PhaseObjective};
pub use rcg::{rcg_optimize, rcg_optimize_phases, RcgOptions, RcgResult, RcgState, Termination};
