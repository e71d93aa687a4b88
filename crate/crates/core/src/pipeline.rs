//! Link evaluation: beams on composite channels, DL/UL gains, SINR, and the
//! utility report.
//!
//! Every user has one receiving link: its serving AP, or its best-rate AP
//! when association left it unserved. Only served users transmit, so only
//! they interfere.

use std::collections::BTreeMap;

use nalgebra::{Complex, DVector};

use crate::association::Association;
use crate::beamforming::{build_analog_codebook, AnalogBeamformer, BeamformerSet};
use crate::channel::{ChannelSet, ChannelTensor, PhaseShiftMatrix};
use crate::error::{Error, Result};
use crate::metrics::{
    link_utility_rows, rate, served_by, sinr_dl, sinr_ul, DlGains, InverseSinrError, SinrBreakdown, SinrTable, UlGains,
    UtilityReport,
};
use crate::ops;
use crate::scalar::{count, infinity, norm_sqr, Real};
use crate::scenario::{Scenario, USER_RF_CHAINS};

/// How DL gains are reduced over subcarriers before the SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregation {
    Mean,
    /// Worst case: smallest signal gain, largest interference gains.
    Min,
}

/// AP and user analog codebooks of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebooks<T: Real> {
    pub ap: Vec<AnalogBeamformer<T>>,
    pub user: Vec<AnalogBeamformer<T>>,
}

impl<T: Real> Codebooks<T> {
    pub fn for_scenario(scenario: &Scenario<T>) -> Result<Self> {
        let p = &scenario.params;
        Ok(Self {
            ap: build_analog_codebook(p.n_t, p.n_rf, scenario.codebooks.ap_grid(p.n_t, p.n_rf))?,
            user: build_analog_codebook(p.n_r, USER_RF_CHAINS, scenario.codebooks.user_grid(p.n_r))?,
        })
    }
}

/// Beamformers of one link plus their unit-norm first-stream vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBeams<T: Real> {
    pub set: BeamformerSet<T>,
    /// Per subcarrier, `N_t x 1`.
    pub precoder: Vec<DVector<Complex<T>>>,
    /// Per subcarrier, `N_r x 1`.
    pub combiner: Vec<DVector<Complex<T>>>,
}

impl<T: Real> LinkBeams<T> {
    pub fn from_set(set: BeamformerSet<T>) -> Result<Self> {
        let (f, w) = set.totals()?;
        let first = |m: &nalgebra::DMatrix<Complex<T>>| unit(&m.column(0).into_owned());
        Ok(Self {
            precoder: f.iter().map(first).collect::<Result<_>>()?,
            combiner: w.iter().map(first).collect::<Result<_>>()?,
            set,
        })
    }
}

pub type BeamMap<T> = BTreeMap<(usize, usize), LinkBeams<T>>;

fn unit<T: Real>(v: &DVector<Complex<T>>) -> Result<DVector<Complex<T>>> {
    let norm = v.iter().fold(T::zero(), |a, z| a + norm_sqr(*z)).sqrt();
    if !(norm > T::zero()) {
        return Err(Error::NonFinite("beamformer normalization"));
    }
    Ok(v.map(|z| z / Complex::new(norm, T::zero())))
}

/// `w_n^H H_n f_n` for every subcarrier.
pub fn link_amplitudes<T: Real>(
    h: &ChannelTensor<T>,
    combiner: &[DVector<Complex<T>>],
    precoder: &[DVector<Complex<T>>],
) -> Vec<Complex<T>> {
    h.per_subcarrier
        .iter()
        .zip(combiner.iter().zip(precoder))
        .map(|(hn, (w, f))| {
            ops::record(hn.nrows() * hn.ncols() + hn.ncols());
            (w.adjoint() * hn * f)[0]
        })
        .collect()
}

/// Hybrid beam design for `user` on `ap` at the given phases.
pub fn design_link<T: Real>(
    scenario: &Scenario<T>,
    channels: &ChannelSet<T>,
    codebooks: &Codebooks<T>,
    user: usize,
    ap: usize,
    phases: &PhaseShiftMatrix<T>,
) -> Result<LinkBeams<T>> {
    let h = channels.dl_composite(user, ap, phases)?;
    let set = BeamformerSet::design(
        &h,
        &codebooks.ap,
        &codebooks.user,
        scenario.params.n_s,
        scenario.params.p_ap,
    )?;
    LinkBeams::from_set(set)
}

pub fn design_beams<T: Real>(
    scenario: &Scenario<T>,
    channels: &ChannelSet<T>,
    codebooks: &Codebooks<T>,
    links: &[(usize, usize)],
    phases: &PhaseShiftMatrix<T>,
) -> Result<BeamMap<T>> {
    links
        .iter()
        .map(|&(i, j)| Ok(((i, j), design_link(scenario, channels, codebooks, i, j, phases)?)))
        .collect()
}

/// `rates[user][ap]`: interference-free DL rate with each link's own beams.
pub fn interference_free_rates<T: Real>(
    scenario: &Scenario<T>,
    channels: &ChannelSet<T>,
    codebooks: &Codebooks<T>,
    phases: &PhaseShiftMatrix<T>,
) -> Result<Vec<Vec<T>>> {
    let p = &scenario.params;
    (0..scenario.n_users())
        .map(|i| {
            (0..scenario.n_aps())
                .map(|j| {
                    let beams = design_link(scenario, channels, codebooks, i, j, phases)?;
                    let h = channels.dl_composite(i, j, phases)?;
                    let a = link_amplitudes(&h, &beams.combiner, &beams.precoder);
                    let gain = mean(a.iter().map(|z| norm_sqr(*z)));
                    rate(p.p_ap * gain / p.noise_power, p.bandwidth)
                })
                .collect()
        })
        .collect()
}

fn mean<T: Real>(values: impl ExactSizeIterator<Item = T>) -> T {
    let n = values.len().max(1);
    values.fold(T::zero(), |a, b| a + b) / count(n)
}

/// Receiving link of every user.
pub fn reporting_links(association: &Association) -> Vec<(usize, usize)> {
    (0..association.serving.len())
        .map(|i| (i, association.reporting_ap(i)))
        .collect()
}

fn beams_of<T: Real>(beams: &BeamMap<T>, user: usize, ap: usize) -> Result<&LinkBeams<T>> {
    beams
        .get(&(user, ap))
        .ok_or_else(|| Error::MissingChannel(format!("beams for ap{ap}->user{user}")))
}

/// Gains `|w_i^H H_ib f_lb|^2` reduced over subcarriers, for every receiving
/// link `(i, j)`, every AP `b`, and every beam `l` that AP `b` transmits.
pub fn dl_gains<T: Real>(
    channels: &ChannelSet<T>,
    beams: &BeamMap<T>,
    links: &[(usize, usize)],
    serving: &[Option<usize>],
    phases: &PhaseShiftMatrix<T>,
    aggregation: Aggregation,
) -> Result<DlGains<T>> {
    let cells = served_by(serving, channels.n_aps());
    let mut gains = DlGains::new();
    for &(i, j) in links {
        let w = &beams_of(beams, i, j)?.combiner;
        for (b, cell) in cells.iter().enumerate() {
            let mut targets = cell.clone();
            if b == j && !targets.contains(&i) {
                targets.push(i);
            }
            if targets.is_empty() {
                continue;
            }
            let h = channels.dl_composite(i, b, phases)?;
            for l in targets {
                let power: Vec<T> = link_amplitudes(&h, w, &beams_of(beams, l, b)?.precoder)
                    .into_iter()
                    .map(norm_sqr)
                    .collect();
                let own = b == j && l == i;
                let g = match aggregation {
                    Aggregation::Mean => mean(power.into_iter()),
                    Aggregation::Min if own => power.into_iter().fold(infinity::<T>(), |a, b| a.min(b)),
                    Aggregation::Min => power.into_iter().fold(T::zero(), |a, b| a.max(b)),
                };
                gains.insert(i, b, l, g);
            }
        }
    }
    Ok(gains)
}

/// UL gains after per-subcarrier matched combining at each AP.
///
/// Each user transmits on its DL combiner direction; AP `j` combines user
/// `i`'s stream with `h_ji / |h_ji|`.
pub fn ul_gains<T: Real>(
    channels: &ChannelSet<T>,
    beams: &BeamMap<T>,
    links: &[(usize, usize)],
    serving: &[Option<usize>],
    phases: &PhaseShiftMatrix<T>,
) -> Result<UlGains<T>> {
    let n_aps = channels.n_aps();
    let cells = served_by(serving, n_aps);
    let transmit_beam = |l: usize| -> Result<&[DVector<Complex<T>>]> {
        let ap = serving[l]
            .or_else(|| links.iter().find(|(u, _)| *u == l).map(|(_, a)| *a))
            .ok_or_else(|| Error::MissingChannel(format!("ul beam of user{l}")))?;
        Ok(&beams_of(beams, l, ap)?.combiner)
    };
    let mut vectors: BTreeMap<(usize, usize), Vec<DVector<Complex<T>>>> = BTreeMap::new();
    let mut vector = |j: usize, l: usize| -> Result<Vec<DVector<Complex<T>>>> {
        if let Some(v) = vectors.get(&(j, l)) {
            return Ok(v.clone());
        }
        let h = channels.ul_composite(l, j, phases)?;
        let beam = transmit_beam(l)?;
        let v: Vec<_> = h
            .per_subcarrier
            .iter()
            .zip(beam)
            .map(|(hn, w)| {
                ops::record(hn.nrows() * hn.ncols());
                hn * w
            })
            .collect();
        vectors.insert((j, l), v.clone());
        Ok(v)
    };
    let mut gains = UlGains::new();
    for &(i, j) in links {
        let own = vector(j, i)?;
        gains.insert(j, i, i, own.iter().map(|v| v.norm_squared()).collect());
        for cell in &cells {
            for &l in cell.iter().filter(|&&l| l != i) {
                let other = vector(j, l)?;
                let g = own
                    .iter()
                    .zip(&other)
                    .map(|(a, b)| {
                        let e = a.norm_squared();
                        if e > T::zero() {
                            norm_sqr(a.dotc(b)) / e
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                gains.insert(j, i, l, g);
            }
        }
    }
    Ok(gains)
}

/// SINRs and utility report of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T: Real> {
    pub links: Vec<(usize, usize)>,
    pub sinr_dl: SinrTable<T>,
    pub sinr_ul: BTreeMap<(usize, usize), Vec<SinrBreakdown<T>>>,
    pub report: UtilityReport<T>,
}

impl<T: Real> Evaluation<T> {
    /// Summed DL rate of the served users, bits/s.
    pub fn served_rate(&self, association: &Association, bandwidth: T) -> Result<T> {
        let mut total = T::zero();
        for (i, j) in association.serving.iter().enumerate() {
            if let Some(j) = j {
                total += rate(self.sinr_dl[&(i, *j)].sinr, bandwidth)?;
            }
        }
        Ok(total)
    }
}

pub fn evaluate<T: Real>(
    scenario: &Scenario<T>,
    channels: &ChannelSet<T>,
    beams: &BeamMap<T>,
    association: &Association,
    phases: &PhaseShiftMatrix<T>,
    aggregation: Aggregation,
) -> Result<Evaluation<T>> {
    let p = &scenario.params;
    let links = reporting_links(association);
    let serving = &association.serving;
    let dl = dl_gains(channels, beams, &links, serving, phases, aggregation)?;
    let ul = ul_gains(channels, beams, &links, serving, phases)?;
    let sinr_dl = sinr_dl(&links, serving, &dl, &vec![p.p_ap; scenario.n_aps()], p.noise_power)?;
    let sinr_ul = sinr_ul(
        &links,
        serving,
        scenario.n_aps(),
        &ul,
        &vec![p.p_user; scenario.n_users()],
        p.noise_power,
    )?;
    let dl_values: BTreeMap<_, _> = sinr_dl.iter().map(|(k, v)| (*k, v.sinr)).collect();
    let ul_values: BTreeMap<_, _> = sinr_ul
        .iter()
        .map(|(k, v)| (*k, v.iter().map(|b| b.sinr).collect::<Vec<_>>()))
        .collect();
    let report = report_from_sinr(scenario, association, &dl_values, &ul_values)?;
    Ok(Evaluation {
        links,
        sinr_dl,
        sinr_ul,
        report,
    })
}

/// Utility report from per-link DL SINR and per-subcarrier UL SINR.
pub fn report_from_sinr<T: Real>(
    scenario: &Scenario<T>,
    association: &Association,
    sinr_dl: &BTreeMap<(usize, usize), T>,
    sinr_ul: &BTreeMap<(usize, usize), Vec<T>>,
) -> Result<UtilityReport<T>> {
    let p = &scenario.params;
    let cells = served_by(&association.serving, scenario.n_aps());
    let model = InverseSinrError { e0: p.tracking_e0 };
    let mut report = UtilityReport {
        rows: Vec::new(),
        feasible: Vec::with_capacity(association.serving.len()),
    };
    for (i, j) in reporting_links(association) {
        let missing = || Error::MissingChannel(format!("sinr of ap{j}->user{i}"));
        let dl = *sinr_dl.get(&(i, j)).ok_or_else(missing)?;
        let ul = sinr_ul.get(&(i, j)).ok_or_else(missing)?;
        let rate_dl = rate(dl, p.bandwidth)?;
        let rates_ul = ul.iter().map(|s| rate(*s, p.bandwidth)).collect::<Result<Vec<_>>>()?;
        let feasible = association.is_feasible(i);
        let rows = link_utility_rows(i, j, rate_dl, &rates_ul, ul, cells[j].len(), feasible, p, &model)?;
        report.feasible.push(rows.iter().all(|r| r.feasible));
        report.rows.extend(rows);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::associate_users;
    use crate::channel::synthesize_channels;
    use crate::scenario::Scenario;

    fn small() -> Scenario<f64> {
        let mut s = Scenario::<f64>::default_indoor().with_irs_elements(6);
        s.params.n_sc = 4;
        s
    }

    #[test]
    fn min_aggregation_never_beats_mean() {
        let s = small();
        let ch = synthesize_channels(&s, 3).unwrap();
        let books = Codebooks::for_scenario(&s).unwrap();
        let phi = PhaseShiftMatrix::new((0..6).map(|m| 0.4 * m as f64).collect());
        let rates = interference_free_rates(&s, &ch, &books, &phi).unwrap();
        let assoc = associate_users(&s, &rates).unwrap();
        let beams = design_beams(&s, &ch, &books, &reporting_links(&assoc), &phi).unwrap();
        let mean = evaluate(&s, &ch, &beams, &assoc, &phi, Aggregation::Mean).unwrap();
        let min = evaluate(&s, &ch, &beams, &assoc, &phi, Aggregation::Min).unwrap();
        for (k, v) in &mean.sinr_dl {
            assert!(min.sinr_dl[k].sinr <= v.sinr);
        }
        assert!(min.report.sum_utility() <= mean.report.sum_utility() + 1e-12);
        assert_eq!(mean.report.rows.len(), s.n_users() * s.params.n_sc);
        for r in &mean.report.rows {
            assert!((0.0..=1.0).contains(&r.total_utility));
        }
    }

    #[test]
    fn single_user_gain_matches_effective_channel() {
        let mut s = small();
        s.user_positions.truncate(1);
        s.ap_positions.truncate(1);
        let ch = synthesize_channels(&s, 1).unwrap();
        let books = Codebooks::for_scenario(&s).unwrap();
        let phi = PhaseShiftMatrix::zeros(6);
        let beams = design_beams(&s, &ch, &books, &[(0, 0)], &phi).unwrap();
        let g = dl_gains(&ch, &beams, &[(0, 0)], &[Some(0)], &phi, Aggregation::Mean).unwrap();
        let h = ch.dl_composite(0, 0, &phi).unwrap();
        let (f, w) = beams[&(0, 0)].set.totals().unwrap();
        let mut expect = 0.0;
        for n in 0..4 {
            let a = (w[n].adjoint() * &h.per_subcarrier[n] * &f[n])[(0, 0)];
            expect += a.norm_sqr() / (w[n].norm_squared() * f[n].norm_squared());
        }
        assert!((g.get(0, 0, 0).unwrap() - expect / 4.0).abs() < 1e-12 * expect);
    }
}
