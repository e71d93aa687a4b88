//! Riemannian conjugate gradient ascent on the product of unit circles.
//!
//! Points are stored as angles, so `|e^{j theta}| = 1` holds by
//! construction and the manifold is flat in these coordinates: the
//! Riemannian gradient is the ordinary gradient in `theta`, transport is the
//! identity and retraction is angle wrapping.

use crate::channel::{ChannelSet, PhaseShiftMatrix};
use crate::error::{Error, Result};
use crate::optimizer::objective::{DlProblem, PhaseObjective};
use crate::pipeline::BeamMap;
use crate::scalar::{is_finite, lit, to_f64, Real};
use crate::scenario::{OptimizerSettings, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct RcgOptions<T: Real> {
    /// Stop once the normalized gradient norm `||g|| / ||g_0||` is at most
    /// this, or `||g||` itself is below [`STATIONARY_FLOOR`].
    pub epsilon: T,
    /// Gradient evaluations allowed, counting the initial point.
    pub max_iter: usize,
    /// Largest trial step, in radians of the largest phase change.
    pub initial_step: T,
    pub shrink: T,
    /// Armijo sufficient-increase constant.
    pub armijo: T,
    pub max_backtracks: usize,
    /// Reset to steepest ascent every this many iterations; `None` uses the
    /// problem dimension.
    pub restart_every: Option<usize>,
}

impl<T: Real> RcgOptions<T> {
    pub fn from_settings(settings: &OptimizerSettings<T>) -> Self {
        Self {
            epsilon: settings.epsilon,
            max_iter: settings.max_iter,
            initial_step: settings.initial_step,
            shrink: settings.shrink,
            armijo: settings.armijo,
            max_backtracks: settings.max_backtracks,
            restart_every: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::invalid("optimizer.max_iter", "must be at least 1"));
        }
        if !(self.epsilon >= T::zero()) {
            return Err(Error::invalid("optimizer.epsilon", "must be non-negative"));
        }
        if !(self.shrink > T::zero() && self.shrink < T::one()) {
            return Err(Error::invalid("optimizer.shrink", "must lie in (0, 1)"));
        }
        if !(self.initial_step > T::zero()) {
            return Err(Error::invalid("optimizer.initial_step", "must be positive"));
        }
        Ok(())
    }
}

impl<T: Real> Default for RcgOptions<T> {
    fn default() -> Self {
        Self {
            epsilon: lit(1e-3),
            max_iter: 200,
            initial_step: T::one(),
            shrink: lit(0.5),
            armijo: lit(1e-4),
            max_backtracks: 40,
            restart_every: None,
        }
    }
}

/// Absolute gradient norm treated as an exact stationary point.
pub const STATIONARY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// Neither the conjugate nor the steepest direction gave an Armijo step.
    Stalled,
}

/// Snapshot after each gradient evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RcgState<T: Real> {
    pub iteration: usize,
    pub phases: Vec<T>,
    pub gradient: Vec<T>,
    /// Direction that led to this point (the gradient at iteration 1).
    pub direction: Vec<T>,
    pub grad_norm: T,
    pub objective: T,
    pub step: T,
    pub restarted: bool,
    /// The conjugate direction failed its line search and steepest ascent
    /// was used instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcgResult<T: Real> {
    pub phases: PhaseShiftMatrix<T>,
    pub objective: T,
    pub grad_norm: T,
    pub initial_grad_norm: T,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<RcgState<T>>,
}

impl<T: Real> RcgResult<T> {
    /// `||g|| / ||g_0||` at the returned phases (0 when `g_0 = 0`).
    pub fn normalized_grad_norm(&self) -> T {
        normalized(self.grad_norm, self.initial_grad_norm)
    }
}

fn normalized<T: Real>(norm: T, initial: T) -> T {
    if initial > T::zero() {
        norm / initial
    } else {
        T::zero()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase<T: Real>(theta: T) -> T {
    let two_pi = T::two_pi();
    let mut t = theta - two_pi * (theta / two_pi).round();
    if t <= -T::pi() {
        t += two_pi;
    }
    if t > T::pi() {
        t -= two_pi;
    }
    t
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Armijo backtracking along `d`; returns the accepted point and step.
fn line_search<T: Real, P: PhaseObjective<T>>(
    problem: &P,
    theta: &[T],
    value: T,
    slope: T,
    d: &[T],
    opts: &RcgOptions<T>,
) -> Result<Option<(Vec<T>, T)>> {
    let peak = max_abs(d);
    if !(peak > T::zero()) || !(slope > T::zero()) {
        return Ok(None);
    }
    let mut t = opts.initial_step / peak;
    for _ in 0..opts.max_backtracks {
        let trial: Vec<T> = theta.iter().zip(d).map(|(x, di)| wrap_phase(*x + t * *di)).collect();
        let v = problem.value(&trial)?;
        if is_finite(v) && v >= value + opts.armijo * t * slope {
            return Ok(Some((trial, t)));
        }
        t *= opts.shrink;
    }
    Ok(None)
}

/// Maximizes `problem` from `theta0`.
///
/// Polak-Ribiere+ directions with a restart every `restart_every`
/// iterations or whenever the coefficient is negative. The objective never
/// decreases between accepted iterates, so the final point is also the best.
pub fn rcg_optimize<T: Real, P: PhaseObjective<T>>(
    problem: &P,
    theta0: &[T],
    opts: &RcgOptions<T>,
) -> Result<RcgResult<T>> {
    opts.validate()?;
    if theta0.len() != problem.dimension() {
        return Err(Error::dims("initial phases", problem.dimension(), theta0.len()));
    }
    let restart_every = opts.restart_every.unwrap_or(problem.dimension()).max(1);
    let mut theta: Vec<T> = theta0.iter().map(|t| wrap_phase(*t)).collect();
    let (mut value, mut grad) = problem.value_and_gradient(&theta)?;
    if !is_finite(value) || grad.iter().any(|g| !is_finite(*g)) {
        return Err(Error::NonFinite("objective or gradient"));
    }
    let mut direction = grad.clone();
    let mut trace = vec![RcgState {
        iteration: 1,
        phases: theta.clone(),
        gradient: grad.clone(),
        direction: direction.clone(),
        grad_norm: dot(&grad, &grad).sqrt(),
        objective: value,
        step: T::zero(),
        restarted: true,
        fallback: false,
    }];
    let initial_grad_norm = trace[0].grad_norm;
    let termination = loop {
        let iteration = trace.len();
        let grad_norm = dot(&grad, &grad).sqrt();
        if grad_norm <= lit(STATIONARY_FLOOR) || normalized(grad_norm, initial_grad_norm) <= opts.epsilon {
            break Termination::GradientTolerance;
        }
        if iteration >= opts.max_iter {
            break Termination::MaxIterations;
        }
        let mut restarted = (iteration - 1) % restart_every == 0;
        if !restarted {
            let older = &trace[iteration - 2].gradient;
            let diff: Vec<T> = grad.iter().zip(older).map(|(g, o)| *g - *o).collect();
            let denom = dot(older, older);
            let beta = if denom > T::zero() {
                dot(&grad, &diff) / denom
            } else {
                -T::one()
            };
            if beta < T::zero() {
                restarted = true;
            } else {
                direction = grad.iter().zip(&direction).map(|(g, d)| *g + beta * *d).collect();
            }
        }
        if restarted || dot(&grad, &direction) <= T::zero() {
            direction = grad.clone();
            restarted = true;
        }
        let mut fallback = false;
        let mut accepted = line_search(problem, &theta, value, dot(&grad, &direction), &direction, opts)?;
        if accepted.is_none() && !restarted {
            fallback = true;
            direction = grad.clone();
            accepted = line_search(problem, &theta, value, dot(&grad, &grad), &grad, opts)?;
        }
        let Some((next, step)) = accepted else {
            break Termination::Stalled;
        };
        theta = next;
        (value, grad) = problem.value_and_gradient(&theta)?;
        if !is_finite(value) || grad.iter().any(|g| !is_finite(*g)) {
            return Err(Error::NonFinite("objective or gradient"));
        }
        trace.push(RcgState {
            iteration: iteration + 1,
            phases: theta.clone(),
            gradient: grad.clone(),
            direction: direction.clone(),
            grad_norm: dot(&grad, &grad).sqrt(),
            objective: value,
            step,
            restarted,
            fallback,
        });
    };
    let last = trace.last().expect("initial state recorded");
    debug_assert!(trace
        .windows(2)
        .all(|w| to_f64(w[1].objective) >= to_f64(w[0].objective)));
    Ok(RcgResult {
        phases: PhaseShiftMatrix::new(last.phases.clone()),
        objective: last.objective,
        grad_norm: last.grad_norm,
        initial_grad_norm,
        iterations: last.iteration,
        termination,
        trace,
    })
}

/// [`rcg_optimize`] on the DL sum-rate objective of `scenario` with fixed
/// beams.
#[allow(clippy::too_many_arguments)]
pub fn rcg_optimize_phases<T: Real>(
    scenario: &Scenario<T>,
    channels: &ChannelSet<T>,
    beams: &BeamMap<T>,
    serving: &[Option<usize>],
    phases0: &PhaseShiftMatrix<T>,
    epsilon: T,
    max_iter: usize,
) -> Result<RcgResult<T>> {
    let p = &scenario.params;
    let problem = DlProblem::new(channels, beams, serving, p.p_ap, p.noise_power)?;
    let opts = RcgOptions {
        epsilon,
        max_iter,
        ..RcgOptions::from_settings(&scenario.optimizer)
    };
    rcg_optimize(&problem, &phases0.phases, &opts)
}
