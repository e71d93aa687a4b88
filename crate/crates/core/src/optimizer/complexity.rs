//! Operation-count probe for phase optimization and hybrid beamforming.
//!
//! At each size `M` the probe sets `N_t = N_r = M` and an `M`-element IRS
//! on a single-user, single-AP link, then counts complex multiply-accumulates
//! of (a) a fixed number `R` of RCG iterations and (b) one hybrid beam
//! design for a fixed codeword pair plus the effective channel.
//!
//! Armijo backtracking makes the number of objective evaluations in `R`
//! iterations data dependent, so rows also carry the evaluation count and
//! [`ComplexityRow::nominal_phase_ops`] rescales the count to exactly two
//! evaluations (gradient plus one line-search trial) per iteration.

use std::cell::Cell;

use std::time::Instant;

use crate::beamforming::{effective_channel, BeamformerSet};
use crate::channel::synthesize_channels;
use crate::error::{Error, Result};
use crate::ops;
use crate::optimizer::ao::initial_phases;
use crate::optimizer::objective::{DlProblem, PhaseObjective};
use crate::optimizer::rcg::{rcg_optimize, RcgOptions};
use crate::pipeline::{BeamMap, Codebooks, LinkBeams};
use crate::scalar::Real;
use crate::scenario::{PhaseInit, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityOptions {
    /// RCG iterations per probe, `R`.
    pub iterations: usize,
    pub n_sc: usize,
    pub seed: u64,
}

impl Default for ComplexityOptions {
    fn default() -> Self {
        Self {
            iterations: 10,
            n_sc: 2,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub m: usize,
    pub phase_ops: u64,
    pub phase_seconds: f64,
    pub rcg_iterations: usize,
    /// Objective evaluations, with or without gradient, during RCG.
    pub evaluations: usize,
    pub hybrid_ops: u64,
    pub hybrid_seconds: f64,
}

impl ComplexityRow {
    pub fn ops_per_evaluation(&self) -> f64 {
        self.phase_ops as f64 / self.evaluations.max(1) as f64
    }

    /// Phase-optimization MACs for `2R` evaluations.
    pub fn nominal_phase_ops(&self) -> f64 {
        2.0 * self.rcg_iterations as f64 * self.ops_per_evaluation()
    }
}

struct Counted<'a, P> {
    inner: &'a P,
    calls: Cell<usize>,
}

impl<T: Real, P: PhaseObjective<T>> PhaseObjective<T> for Counted<'_, P> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn value(&self, theta: &[T]) -> Result<T> {
        self.calls.set(self.calls.get() + 1);
        self.inner.value(theta)
    }

    fn value_and_gradient(&self, theta: &[T]) -> Result<(T, Vec<T>)> {
        self.calls.set(self.calls.get() + 1);
        self.inner.value_and_gradient(theta)
    }
}

fn probe_scenario<T: Real>(base: &Scenario<T>, m: usize, n_sc: usize, seed: u64) -> Scenario<T> {
    let mut s = base.with_irs_elements(m);
    s.user_positions.truncate(1);
    s.ap_positions.truncate(1);
    s.params.n_t = m;
    s.params.n_r = m;
    s.params.n_rf = 1;
    s.params.n_s = 1;
    s.params.n_sc = n_sc;
    s.io.seed = seed;
    s
}

/// One row per entry of `m_values` (ascending) on `base`'s geometry.
pub fn complexity_probe<T: Real>(
    base: &Scenario<T>,
    m_values: &[usize],
    opts: &ComplexityOptions,
) -> Result<Vec<ComplexityRow>> {
    if m_values.windows(2).any(|w| w[0] >= w[1]) || m_values.first() == Some(&0) {
        return Err(Error::InvalidArgument(
            "complexity sizes must be positive and ascending".into(),
        ));
    }
    if base.n_users() == 0 || base.n_aps() == 0 || base.irs_panels.is_empty() {
        return Err(Error::InvalidArgument(
            "complexity probe needs a user, an AP and an IRS panel".into(),
        ));
    }
    m_values
        .iter()
        .map(|&m| {
            let s = probe_scenario(base, m, opts.n_sc, opts.seed);
            let channels = synthesize_channels(&s, opts.seed)?;
            let books = Codebooks::for_scenario(&s)?;
            let phases = initial_phases::<T>(m, opts.seed, PhaseInit::Random);
            let h = channels.dl_composite(0, 0, &phases)?;

            let clock = Instant::now();
            let (set, hybrid_ops) = ops::measure(|| -> Result<_> {
                let set = BeamformerSet::design_with(&h, &books.ap[0], &books.user[0], 1, s.params.p_ap)?;
                let (f, w) = set.totals()?;
                effective_channel(&h, &f, &w)?;
                Ok(set)
            });
            let hybrid_seconds = clock.elapsed().as_secs_f64();
            let mut beams = BeamMap::new();
            beams.insert((0, 0), LinkBeams::from_set(set?)?);

            let rcg = RcgOptions {
                epsilon: T::zero(),
                max_iter: opts.iterations,
                ..RcgOptions::from_settings(&s.optimizer)
            };
            let clock = Instant::now();
            let (result, phase_ops) = ops::measure(|| -> Result<_> {
                let problem = DlProblem::new(&channels, &beams, &[Some(0)], s.params.p_ap, s.params.noise_power)?;
                let counted = Counted {
                    inner: &problem,
                    calls: Cell::new(0),
                };
                let r = rcg_optimize(&counted, &phases.phases, &rcg)?;
                Ok((r.iterations, counted.calls.get()))
            });
            let phase_seconds = clock.elapsed().as_secs_f64();
            let (rcg_iterations, evaluations) = result?;
            Ok(ComplexityRow {
                m,
                phase_ops,
                phase_seconds,
                rcg_iterations,
                evaluations,
                hybrid_ops,
                hybrid_seconds,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::dims("log-log fit", xs.len().max(2), ys.len()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 3.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn small_probe_counts_grow() {
        let base = Scenario::<f64>::default_indoor();
        let rows = complexity_probe(&base, &[2, 4, 8], &ComplexityOptions::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows
            .windows(2)
            .all(|w| w[1].phase_ops > w[0].phase_ops && w[1].hybrid_ops > w[0].hybrid_ops));
        assert!(rows.iter().all(|r| r.evaluations > r.rcg_iterations));
        assert!(complexity_probe(&base, &[4, 2], &ComplexityOptions::default()).is_err());
    }
}
