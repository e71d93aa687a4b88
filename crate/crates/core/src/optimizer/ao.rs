//! Alternating optimization of hybrid beams and IRS phases.
//!
//! Round 0 associates users and designs beams at the initial phases. Each
//! later round runs RCG on the phases with the beams fixed, then redesigns
//! the beams at the new phases and keeps them only if the objective does
//! not drop. Association stays fixed across rounds.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::association::{associate_users, Association};
use crate::channel::{synthesize_channels, ChannelSet, PhaseShiftMatrix};
use crate::error::Result;
use crate::optimizer::objective::{DlProblem, PhaseObjective};
use crate::optimizer::rcg::{rcg_optimize, wrap_phase, RcgOptions, RcgResult};
use crate::pipeline::{
    design_beams, evaluate, interference_free_rates, reporting_links, Aggregation, BeamMap, Codebooks, Evaluation,
};
use crate::scalar::{lit, Real};
use crate::scenario::{PhaseInit, Scenario};

/// Stream id of the initial-phase draws, disjoint from the fading streams.
const PHASE_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq)]
pub struct AoOptions<T: Real> {
    pub max_rounds: usize,
    /// Stop when the relative objective gain of a round is below this.
    pub tolerance: T,
    pub rcg: RcgOptions<T>,
    pub seed: u64,
    pub init: PhaseInit,
}

impl<T: Real> AoOptions<T> {
    pub fn from_scenario(scenario: &Scenario<T>) -> Self {
        let o = &scenario.optimizer;
        Self {
            max_rounds: o.max_rounds,
            tolerance: o.round_tolerance,
            rcg: RcgOptions::from_settings(o),
            seed: scenario.io.seed,
            init: o.init,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoRound<T: Real> {
    pub round: usize,
    /// Served users' DL sum rate, bits/s.
    pub objective: T,
    /// DL rate per user, bits/s; `None` for unserved users.
    pub rates_dl: Vec<Option<T>>,
    pub phases: Vec<T>,
    /// `(user, ap, precoder id, combiner id)` per served link.
    pub codebook_ids: Vec<(usize, usize, String, String)>,
    /// Gradient norm (bits/s/Hz per radian) at the round's phases.
    pub grad_norm: T,
    pub rcg_iterations: usize,
    pub beams_redesigned: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace<T: Real> {
    pub rounds: Vec<AoRound<T>>,
    /// RCG result of every round after the first.
    pub rcg: Vec<RcgResult<T>>,
}

impl<T: Real> AoTrace<T> {
    pub fn objectives(&self) -> Vec<T> {
        self.rounds.iter().map(|r| r.objective).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoOutcome<T: Real> {
    pub channels: ChannelSet<T>,
    pub association: Association,
    pub beams: BeamMap<T>,
    pub phases: PhaseShiftMatrix<T>,
    /// Mean-gain evaluation at the final beams and phases.
    pub evaluation: Evaluation<T>,
    pub trace: AoTrace<T>,
}

impl<T: Real> AoOutcome<T> {
    pub fn evaluate(&self, scenario: &Scenario<T>, aggregation: Aggregation) -> Result<Evaluation<T>> {
        evaluate(
            scenario,
            &self.channels,
            &self.beams,
            &self.association,
            &self.phases,
            aggregation,
        )
    }
}

/// Starting phases for `m` elements.
pub fn initial_phases<T: Real>(m: usize, seed: u64, init: PhaseInit) -> PhaseShiftMatrix<T> {
    match init {
        PhaseInit::Zero => PhaseShiftMatrix::zeros(m),
        PhaseInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(PHASE_STREAM);
            let pi = std::f64::consts::PI;
            PhaseShiftMatrix::new((0..m).map(|_| wrap_phase(lit(rng.random_range(-pi..pi)))).collect())
        }
    }
}

/// Channel synthesis, association, beam design and evaluation at the
/// initial phases, with no optimization.
pub fn single_pass<T: Real>(scenario: &Scenario<T>) -> Result<(Association, Evaluation<T>)> {
    let seed = scenario.io.seed;
    let channels = synthesize_channels(scenario, seed)?;
    let books = Codebooks::for_scenario(scenario)?;
    let phases = initial_phases(scenario.n_elements(), seed, scenario.optimizer.init);
    let rates = interference_free_rates(scenario, &channels, &books, &phases)?;
    let association = associate_users(scenario, &rates)?;
    let beams = design_beams(scenario, &channels, &books, &reporting_links(&association), &phases)?;
    let evaluation = evaluate(scenario, &channels, &beams, &association, &phases, Aggregation::Mean)?;
    Ok((association, evaluation))
}

/// [`alternating_optimize_with`] using the scenario's optimizer settings.
pub fn alternating_optimize<T: Real>(scenario: &Scenario<T>) -> Result<AoOutcome<T>> {
    alternating_optimize_with(scenario, &AoOptions::from_scenario(scenario))
}

pub fn alternating_optimize_with<T: Real>(scenario: &Scenario<T>, opts: &AoOptions<T>) -> Result<AoOutcome<T>> {
    let p = &scenario.params;
    let start = Instant::now();
    let channels = synthesize_channels(scenario, opts.seed)?;
    let books = Codebooks::for_scenario(scenario)?;
    let mut phases = initial_phases(scenario.n_elements(), opts.seed, opts.init);
    let rates = interference_free_rates(scenario, &channels, &books, &phases)?;
    let association = associate_users(scenario, &rates)?;
    let links = reporting_links(&association);
    let serving = &association.serving;
    let mut beams = design_beams(scenario, &channels, &books, &links, &phases)?;

    let problem = DlProblem::new(&channels, &beams, serving, p.p_ap, p.noise_power)?;
    let (mut objective, grad) = problem.value_and_gradient(&phases.phases)?;
    let mut trace = AoTrace {
        rounds: vec![round_record(
            0,
            &problem,
            &beams,
            serving,
            &phases,
            objective,
            norm(&grad),
            0,
            true,
            p.bandwidth,
            start,
        )?],
        rcg: Vec::new(),
    };

    if !phases.is_empty() {
        for round in 1..=opts.max_rounds {
            let started = Instant::now();
            let problem = DlProblem::new(&channels, &beams, serving, p.p_ap, p.noise_power)?;
            let result = rcg_optimize(&problem, &phases.phases, &opts.rcg)?;
            phases = result.phases.clone();
            let previous = objective;
            objective = result.objective;

            let candidate = design_beams(scenario, &channels, &books, &links, &phases)?;
            let redesigned = DlProblem::new(&channels, &candidate, serving, p.p_ap, p.noise_power)?;
            let (value, grad) = redesigned.value_and_gradient(&phases.phases)?;
            let accepted = value >= objective;
            let (problem, grad_norm) = if accepted {
                beams = candidate;
                objective = value;
                (redesigned, norm(&grad))
            } else {
                (problem, result.grad_norm)
            };
            trace.rounds.push(round_record(
                round,
                &problem,
                &beams,
                serving,
                &phases,
                objective,
                grad_norm,
                result.iterations,
                accepted,
                p.bandwidth,
                started,
            )?);
            trace.rcg.push(result);
            if objective - previous <= opts.tolerance * previous.abs() {
                break;
            }
        }
    }

    let evaluation = evaluate(scenario, &channels, &beams, &association, &phases, Aggregation::Mean)?;
    Ok(AoOutcome {
        channels,
        association,
        beams,
        phases,
        evaluation,
        trace,
    })
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, x| a + *x * *x).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn round_record<T: Real>(
    round: usize,
    problem: &DlProblem<T>,
    beams: &BeamMap<T>,
    serving: &[Option<usize>],
    phases: &PhaseShiftMatrix<T>,
    objective: T,
    grad_norm: T,
    rcg_iterations: usize,
    beams_redesigned: bool,
    bandwidth: T,
    started: Instant,
) -> Result<AoRound<T>> {
    let per_user = problem.rates(&phases.phases)?;
    let mut served = per_user.into_iter();
    let rates_dl = serving
        .iter()
        .map(|j| j.map(|_| bandwidth * served.next().expect("one rate per served user")))
        .collect();
    let codebook_ids = serving
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .map(|(i, j)| {
            let (a, u) = beams[&(i, j)].set.codebook_ids();
            (i, j, a, u)
        })
        .collect();
    Ok(AoRound {
        round,
        objective: objective * bandwidth,
        rates_dl,
        phases: phases.phases.clone(),
        codebook_ids,
        grad_norm,
        rcg_iterations,
        beams_redesigned,
        seconds: started.elapsed().as_secs_f64(),
    })
}
