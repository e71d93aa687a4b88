//! SINR, rates, delays and utility.
//!
//! DL gains are keyed `(receiving user i, AP b, intended user l)` and hold
//! `|w_i^H H_ib f_lb|^2` for a unit-power precoder `f_lb`, already
//! aggregated over subcarriers. UL gains are keyed `(AP j, intended user i,
//! transmitting user l)` and hold, per subcarrier, the power of user `l`'s
//! channel after AP `j`'s matched combiner for user `i`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{infinity, is_finite, lit, to_f64, Real};
use crate::scenario::{ProcessingShare, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrBreakdown<T: Real> {
    pub signal: T,
    pub intra_interference: T,
    pub inter_interference: T,
    pub noise: T,
    pub sinr: T,
}

impl<T: Real> SinrBreakdown<T> {
    pub fn new(signal: T, intra_interference: T, inter_interference: T, noise: T) -> Self {
        Self {
            signal,
            intra_interference,
            inter_interference,
            noise,
            sinr: signal / (noise + intra_interference + inter_interference),
        }
    }
}

/// SINR of a link, either modeled from gains or imported as a bare value
/// (no interference decomposition available).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkSinr<T: Real> {
    Modeled(SinrBreakdown<T>),
    External(T),
}

impl<T: Real> LinkSinr<T> {
    pub fn sinr(&self) -> T {
        match self {
            LinkSinr::Modeled(b) => b.sinr,
            LinkSinr::External(s) => *s,
        }
    }

    pub fn breakdown(&self) -> Option<&SinrBreakdown<T>> {
        match self {
            LinkSinr::Modeled(b) => Some(b),
            LinkSinr::External(_) => None,
        }
    }
}

/// `(user, ap) -> SINR`.
pub type SinrTable<T> = BTreeMap<(usize, usize), SinrBreakdown<T>>;

/// Users served by each AP, in user order.
pub fn served_by(serving: &[Option<usize>], n_aps: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_aps];
    for (i, ap) in serving.iter().enumerate() {
        if let Some(j) = ap {
            if *j < n_aps {
                out[*j].push(i);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DlGains<T: Real> {
    entries: BTreeMap<(usize, usize, usize), T>,
}

impl<T: Real> DlGains<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, user: usize, ap: usize, intended: usize, gain: T) {
        self.entries.insert((user, ap, intended), gain);
    }

    pub fn get(&self, user: usize, ap: usize, intended: usize) -> Result<T> {
        self.entries
            .get(&(user, ap, intended))
            .copied()
            .ok_or_else(|| Error::MissingChannel(format!("dl gain ap{ap}->user{user} (beam of user{intended})")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UlGains<T: Real> {
    entries: BTreeMap<(usize, usize, usize), Vec<T>>,
}

impl<T: Real> UlGains<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, ap: usize, intended: usize, transmitter: usize, gains: Vec<T>) {
        self.entries.insert((ap, intended, transmitter), gains);
    }

    pub fn get(&self, ap: usize, intended: usize, transmitter: usize) -> Result<&[T]> {
        self.entries
            .get(&(ap, intended, transmitter))
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::MissingChannel(format!(
                    "ul gain user{transmitter}->ap{ap} (combiner of user{intended})"
                ))
            })
    }
}

/// DL SINR of each receiving `(user, ap)` link.
///
/// Interferers are the users in `serving`: intra-cell from the other users of
/// the same AP, inter-cell from every user of every other AP, all as
/// received by user `i`. A receiving link whose user is not served still
/// gets a SINR (its would-be rate) but causes no interference.
pub fn sinr_dl<T: Real>(
    links: &[(usize, usize)],
    serving: &[Option<usize>],
    gains: &DlGains<T>,
    p_ap: &[T],
    noise: T,
) -> Result<SinrTable<T>> {
    let cells = served_by(serving, p_ap.len());
    let mut out = SinrTable::new();
    for &(i, j) in links {
        let signal = p_ap[j] * gains.get(i, j, i)?;
        let mut intra = T::zero();
        for &l in cells[j].iter().filter(|&&l| l != i) {
            intra += p_ap[j] * gains.get(i, j, l)?;
        }
        let mut inter = T::zero();
        for (b, users) in cells.iter().enumerate().filter(|(b, _)| *b != j) {
            for &l in users.iter().filter(|&&l| l != i) {
                inter += p_ap[b] * gains.get(i, b, l)?;
            }
        }
        out.insert((i, j), SinrBreakdown::new(signal, intra, inter, noise));
    }
    Ok(out)
}

pub type UlSinrMap<T> = BTreeMap<(usize, usize), Vec<SinrBreakdown<T>>>;

/// Per-subcarrier UL SINR of each receiving `(user, ap)` link.
pub fn sinr_ul<T: Real>(
    links: &[(usize, usize)],
    serving: &[Option<usize>],
    n_aps: usize,
    gains: &UlGains<T>,
    p_user: &[T],
    noise: T,
) -> Result<UlSinrMap<T>> {
    let cells = served_by(serving, n_aps);
    let mut out = BTreeMap::new();
    for &(i, j) in links {
        let own = gains.get(j, i, i)?;
        let mut rows = Vec::with_capacity(own.len());
        for (n, &g) in own.iter().enumerate() {
            let mut intra = T::zero();
            for &l in cells[j].iter().filter(|&&l| l != i) {
                intra += p_user[l] * gains.get(j, i, l)?[n];
            }
            let mut inter = T::zero();
            for users in cells.iter().enumerate().filter(|(b, _)| *b != j).map(|(_, u)| u) {
                for &l in users.iter().filter(|&&l| l != i) {
                    inter += p_user[l] * gains.get(j, i, l)?[n];
                }
            }
            rows.push(SinrBreakdown::new(p_user[i] * g, intra, inter, noise));
        }
        out.insert((i, j), rows);
    }
    Ok(out)
}

/// Receiving links of the served users.
pub fn served_links(serving: &[Option<usize>]) -> Vec<(usize, usize)> {
    serving
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect()
}

/// `BW log2(1 + sinr)`.
pub fn rate<T: Real>(sinr: T, bandwidth: T) -> Result<T> {
    if sinr < T::zero() {
        return Err(Error::NegativeSinr(to_f64(sinr)));
    }
    Ok(bandwidth * (T::one() + sinr).log2())
}

fn bits_over_rate<T: Real>(bits: T, rate: T) -> T {
    if bits == T::zero() {
        T::zero()
    } else if rate > T::zero() {
        bits / rate
    } else {
        infinity()
    }
}

/// `S_i / c_DL + A_i / c_UL`; a zero rate carrying bits gives `+inf`.
pub fn transmission_delay<T: Real>(s_i: T, a_i: T, rate_dl: T, rate_ul: T) -> T {
    bits_over_rate(s_i, rate_dl) + bits_over_rate(a_i, rate_ul)
}

/// `clamp(v e, 0, S_i)` bits processed at `m_proc / |U_j|` bits/s (or
/// `m_proc / N_j` with `N_j = p_ap / |U_j|` in the power-share mode).
pub fn processing_delay<T: Real>(tracking_error: T, params: &SystemParams<T>, served_users: usize) -> Result<T> {
    if !(params.m_proc > T::zero()) {
        return Err(Error::invalid("system.m_proc", "must be positive"));
    }
    if tracking_error < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "tracking error must be non-negative, got {}",
            to_f64(tracking_error)
        )));
    }
    let users = crate::scalar::count::<T>(served_users.max(1));
    let payload = (params.v_bits * tracking_error).max(T::zero()).min(params.s_i);
    let service = match params.processing_share {
        ProcessingShare::EqualShare => params.m_proc / users,
        ProcessingShare::PowerPerUser => params.m_proc / (params.p_ap / users),
    };
    Ok(payload / service)
}

/// `1 / (mu - lambda)`.
pub fn queuing_delay<T: Real>(mu: T, lambda: T) -> Result<T> {
    if !(mu > lambda) {
        return Err(Error::QueueUnstable {
            path: "system.mu_j".into(),
            mu: to_f64(mu),
            lambda: to_f64(lambda),
        });
    }
    Ok(T::one() / (mu - lambda))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBreakdown<T: Real> {
    pub transmission: T,
    pub processing: T,
    pub queuing: T,
    pub total: T,
}

impl<T: Real> DelayBreakdown<T> {
    pub fn is_feasible(&self) -> bool {
        is_finite(self.total)
    }
}

pub fn total_delay<T: Real>(transmission: T, processing: T, queuing: T) -> DelayBreakdown<T> {
    DelayBreakdown {
        transmission,
        processing,
        queuing,
        total: transmission + processing + queuing,
    }
}

/// Piecewise-linear delay satisfaction: 1 below `gamma`, falling linearly
/// to 0 at `d_max`.
///
/// When `d_max <= gamma` the slope is undefined; the result is then 1 for
/// `d <= gamma` and 0 otherwise.
pub fn conditional_utility<T: Real>(d: T, d_max: T, gamma: T) -> T {
    if !is_finite(d) {
        return T::zero();
    }
    if d < gamma {
        return T::one();
    }
    if d_max <= gamma {
        return if d <= gamma { T::one() } else { T::zero() };
    }
    ((d_max - d) / (d_max - gamma)).max(T::zero()).min(T::one())
}

/// `1 - e_n / max(e)`; all ones when the largest error is zero.
pub fn routing_utilities<T: Real>(errors: &[T]) -> Vec<T> {
    let max = errors.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if max <= T::zero() {
        return vec![T::one(); errors.len()];
    }
    errors.iter().map(|&e| T::one() - e / max).collect()
}

/// Routing utility times conditional utility, per subcarrier, with `d_max`
/// the largest delay in `delays`.
pub fn total_utility<T: Real>(tracking_errors: &[T], delays: &[T], gamma: T) -> Result<Vec<T>> {
    if tracking_errors.is_empty() || tracking_errors.len() != delays.len() {
        return Err(Error::dims(
            "utility subcarriers",
            format!("{} (non-zero)", tracking_errors.len()),
            delays.len().to_string(),
        ));
    }
    let d_max = delays.iter().copied().fold(-infinity::<T>(), |a, b| a.max(b));
    Ok(routing_utilities(tracking_errors)
        .into_iter()
        .zip(delays)
        .map(|(r, &d)| r * conditional_utility(d, d_max, gamma))
        .collect())
}

/// Maps UL SINR to a tracking (routing) error.
pub trait TrackingErrorModel<T: Real> {
    fn tracking_error(&self, sinr_ul: T) -> T;
}

/// `e0 / (1 + sinr)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseSinrError<T: Real> {
    pub e0: T,
}

impl<T: Real> TrackingErrorModel<T> for InverseSinrError<T> {
    fn tracking_error(&self, sinr_ul: T) -> T {
        self.e0 / (T::one() + sinr_ul)
    }
}

pub fn tracking_error_model<T: Real>(sinr_ul: T, model: &dyn TrackingErrorModel<T>) -> Result<T> {
    if sinr_ul < T::zero() {
        return Err(Error::NegativeSinr(to_f64(sinr_ul)));
    }
    Ok(model.tracking_error(sinr_ul))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityRow<T: Real> {
    pub user: usize,
    pub ap: usize,
    pub subcarrier: usize,
    pub rate_dl: T,
    pub rate_ul: T,
    pub delay: DelayBreakdown<T>,
    pub conditional_utility: T,
    pub routing_utility: T,
    pub total_utility: T,
    pub feasible: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UtilityReport<T: Real> {
    pub rows: Vec<UtilityRow<T>>,
    /// Per user: served with rate at least `r_min`.
    pub feasible: Vec<bool>,
}

impl<T: Real> UtilityReport<T> {
    pub fn sum_utility(&self) -> T {
        self.rows.iter().fold(T::zero(), |a, r| a + r.total_utility)
    }

    pub fn rows_for(&self, user: usize) -> impl Iterator<Item = &UtilityRow<T>> {
        self.rows.iter().filter(move |r| r.user == user)
    }

    /// Smallest transmission delay over the subcarriers of `user`'s link.
    pub fn min_transmission_delay(&self, user: usize) -> Option<(usize, T)> {
        self.rows_for(user)
            .map(|r| (r.ap, r.delay.transmission))
            .fold(None, |acc: Option<(usize, T)>, (ap, d)| match acc {
                Some((_, best)) if best <= d => acc,
                _ => Some((ap, d)),
            })
    }
}

/// Report rows of one `(user, ap)` link.
///
/// The queuing delay is common to every subcarrier of the link, so the
/// conditional utility is evaluated on `D_T + D_p` against the shifted
/// threshold `gamma - D_q`. This is the same quantity, but keeps the
/// subcarrier spread resolvable when `D_q` is many orders larger.
#[allow(clippy::too_many_arguments)]
pub fn link_utility_rows<T: Real>(
    user: usize,
    ap: usize,
    rate_dl: T,
    rates_ul: &[T],
    sinr_ul: &[T],
    served_users: usize,
    link_feasible: bool,
    params: &SystemParams<T>,
    model: &dyn TrackingErrorModel<T>,
) -> Result<Vec<UtilityRow<T>>> {
    if rates_ul.len() != sinr_ul.len() || rates_ul.is_empty() {
        return Err(Error::dims(
            "UL subcarriers",
            rates_ul.len().to_string(),
            sinr_ul.len().to_string(),
        ));
    }
    let q = queuing_delay(params.mu_j, params.lambda_i)?;
    let mut delays = Vec::with_capacity(rates_ul.len());
    let mut errors = Vec::with_capacity(rates_ul.len());
    for (&c_ul, &s_ul) in rates_ul.iter().zip(sinr_ul) {
        let e = tracking_error_model(s_ul, model)?;
        let d_t = transmission_delay(params.s_i, params.a_i, rate_dl, c_ul);
        let d_p = processing_delay(e, params, served_users)?;
        delays.push(total_delay(d_t, d_p, q));
        errors.push(e);
    }
    let feasible = link_feasible && delays.iter().all(DelayBreakdown::is_feasible);
    let varying: Vec<T> = delays.iter().map(|d| d.transmission + d.processing).collect();
    let shifted_gamma = params.gamma_d - q;
    let v_max = varying.iter().copied().fold(-infinity::<T>(), |a, b| a.max(b));
    let routing = routing_utilities(&errors);
    Ok(delays
        .into_iter()
        .enumerate()
        .map(|(n, delay)| {
            let (cond, route) = if feasible {
                (conditional_utility(varying[n], v_max, shifted_gamma), routing[n])
            } else {
                (T::zero(), T::zero())
            };
            UtilityRow {
                user,
                ap,
                subcarrier: n,
                rate_dl,
                rate_ul: rates_ul[n],
                delay,
                conditional_utility: cond,
                routing_utility: route,
                total_utility: cond * route,
                feasible,
            }
        })
        .collect())
}

/// dB to linear power ratio.
pub fn db_to_linear<T: Real>(db: T) -> T {
    lit::<T>(10.0).powf(db / lit(10.0))
}
