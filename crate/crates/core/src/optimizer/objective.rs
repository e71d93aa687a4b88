//! DL sum-rate objective as a function of the IRS phase angles.
//!
//! `J(theta) = sum_i log2(1 + SINR_i)` over served users (bits/s/Hz), with
//! SINR built from subcarrier-mean gains exactly as in link evaluation.
//! Each amplitude is affine in the reflection coefficients,
//! `a = c + sum_m phi_m kappa_m` with `kappa_m = (w^H r_m)(t_m f)`, so
//! `d|a|^2 / d theta_m = 2 Re(conj(a) j phi_m kappa_m)`.

use nalgebra::{Complex, DVector};

use crate::channel::{Band, ChannelSet, ChannelTensor, LinkId, NodeId, PhaseShiftMatrix};
use crate::error::{Error, Result};
use crate::metrics::served_by;
use crate::ops;
use crate::pipeline::{link_amplitudes, BeamMap};
use crate::scalar::{cis, count, is_finite, lit, norm_sqr, Real};
use crate::scenario::Scenario;

/// A smooth real objective over `dimension()` phase angles.
pub trait PhaseObjective<T: Real> {
    fn dimension(&self) -> usize;

    fn value(&self, theta: &[T]) -> Result<T>;

    fn value_and_gradient(&self, theta: &[T]) -> Result<(T, Vec<T>)>;
}

/// One `(receiver i, AP b, beam l)` amplitude.
#[derive(Debug, Clone)]
struct Term<T: Real> {
    ap: usize,
    beam: usize,
    signal: bool,
    /// `[m][n]` products `t_m f`.
    tx: Vec<Vec<Complex<T>>>,
}

#[derive(Debug, Clone)]
struct Receiver<T: Real> {
    user: usize,
    combiner: Vec<DVector<Complex<T>>>,
    /// `[m][n]` products `w^H r_m`.
    rx: Vec<Vec<Complex<T>>>,
    terms: Vec<Term<T>>,
}

/// Sum DL rate of the served users for fixed beams.
/// Per-subcarrier unit vectors.
type Beam<T> = Vec<DVector<Complex<T>>>;

#[derive(Debug, Clone)]
pub struct DlProblem<T: Real> {
    channels: ChannelSet<T>,
    receivers: Vec<Receiver<T>>,
    precoders: Vec<((usize, usize), Beam<T>)>,
    p_ap: T,
    noise: T,
}

impl<T: Real> DlProblem<T> {
    pub fn new(
        channels: &ChannelSet<T>,
        beams: &BeamMap<T>,
        serving: &[Option<usize>],
        p_ap: T,
        noise: T,
    ) -> Result<Self> {
        let cells = served_by(serving, channels.n_aps());
        let m_count = channels.n_elements();
        let mut precoders = Vec::new();
        for (b, cell) in cells.iter().enumerate() {
            for &l in cell {
                let lb = beams
                    .get(&(l, b))
                    .ok_or_else(|| Error::MissingChannel(format!("beams for ap{b}->user{l}")))?;
                precoders.push(((l, b), lb.precoder.clone()));
            }
        }
        let precoder = |l: usize, b: usize| &precoders.iter().find(|(k, _)| *k == (l, b)).expect("served beam").1;
        let mut receivers = Vec::new();
        for (i, j) in serving.iter().enumerate().filter_map(|(i, j)| j.map(|j| (i, j))) {
            let w = beams
                .get(&(i, j))
                .ok_or_else(|| Error::MissingChannel(format!("beams for ap{j}->user{i}")))?
                .combiner
                .clone();
            let rx = (0..m_count)
                .map(|m| {
                    channels.dl_irs_user[i][m]
                        .per_subcarrier
                        .iter()
                        .zip(&w)
                        .map(|(r, wn)| {
                            ops::record(r.nrows());
                            (wn.adjoint() * r)[0]
                        })
                        .collect()
                })
                .collect();
            let mut terms = Vec::new();
            for (b, cell) in cells.iter().enumerate() {
                for &l in cell {
                    let f = precoder(l, b);
                    let tx = (0..m_count)
                        .map(|m| {
                            channels.dl_ap_irs[b][m]
                                .per_subcarrier
                                .iter()
                                .zip(f)
                                .map(|(t, fn_)| {
                                    ops::record(t.ncols());
                                    (t * fn_)[0]
                                })
                                .collect()
                        })
                        .collect();
                    terms.push(Term {
                        ap: b,
                        beam: l,
                        signal: b == j && l == i,
                        tx,
                    });
                }
            }
            receivers.push(Receiver {
                user: i,
                combiner: w,
                rx,
                terms,
            });
        }
        Ok(Self {
            channels: channels.clone(),
            receivers,
            precoders,
            p_ap,
            noise,
        })
    }

    /// Single-antenna, single-subcarrier link `h0 + sum_m g_m phi_m q_m`
    /// (element to user `g_m`, AP to element `q_m`).
    pub fn scalar(h0: Complex<T>, g: &[Complex<T>], q: &[Complex<T>], power: T, noise: T) -> Result<Self> {
        if g.len() != q.len() {
            return Err(Error::dims("scalar cascade", g.len(), q.len()));
        }
        let one = |v: Complex<T>, from, to| ChannelTensor {
            per_subcarrier: vec![nalgebra::DMatrix::from_element(1, 1, v)],
            link: LinkId::new(from, to),
            band: Band::Dl,
        };
        let channels = ChannelSet {
            n_sc: 1,
            n_t: 1,
            n_r: 1,
            dl_nlos: vec![vec![one(h0, NodeId::Ap(0), NodeId::User(0))]],
            dl_ap_irs: vec![q
                .iter()
                .enumerate()
                .map(|(m, v)| one(*v, NodeId::Ap(0), NodeId::Irs(m)))
                .collect()],
            dl_irs_user: vec![g
                .iter()
                .enumerate()
                .map(|(m, v)| one(*v, NodeId::Irs(m), NodeId::User(0)))
                .collect()],
            ul_nlos: Vec::new(),
            ul_user_irs: Vec::new(),
            ul_irs_ap: Vec::new(),
        };
        let unit = vec![DVector::from_element(1, Complex::new(T::one(), T::zero()))];
        let rx = g.iter().map(|v| vec![*v]).collect();
        let tx = q.iter().map(|v| vec![*v]).collect();
        Ok(Self {
            channels,
            receivers: vec![Receiver {
                user: 0,
                combiner: unit.clone(),
                rx,
                terms: vec![Term {
                    ap: 0,
                    beam: 0,
                    signal: true,
                    tx,
                }],
            }],
            precoders: vec![((0, 0), unit)],
            p_ap: power,
            noise,
        })
    }

    fn precoder(&self, l: usize, b: usize) -> &[DVector<Complex<T>>] {
        &self
            .precoders
            .iter()
            .find(|(k, _)| *k == (l, b))
            .expect("served beam")
            .1
    }

    fn check(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.dimension() {
            return Err(Error::dims("phase vector", self.dimension(), theta.len()));
        }
        if theta.iter().any(|t| !is_finite(*t)) {
            return Err(Error::NonFinite("phase vector"));
        }
        Ok(())
    }

    /// Amplitudes `[receiver][term][n]`, forming each composite channel.
    fn amplitudes(&self, theta: &[T]) -> Result<Vec<Vec<Vec<Complex<T>>>>> {
        let phi = PhaseShiftMatrix::new(theta.to_vec());
        self.receivers
            .iter()
            .map(|rcv| {
                let mut per_ap: Vec<Option<ChannelTensor<T>>> = vec![None; self.channels.n_aps()];
                rcv.terms
                    .iter()
                    .map(|term| {
                        if per_ap[term.ap].is_none() {
                            per_ap[term.ap] = Some(self.channels.dl_composite(rcv.user, term.ap, &phi)?);
                        }
                        let h = per_ap[term.ap].as_ref().expect("composite formed");
                        Ok(link_amplitudes(h, &rcv.combiner, self.precoder(term.beam, term.ap)))
                    })
                    .collect()
            })
            .collect()
    }

    fn mean_power(a: &[Complex<T>]) -> T {
        a.iter().fold(T::zero(), |s, z| s + norm_sqr(*z)) / count(a.len().max(1))
    }

    /// Per served user `(signal, interference + noise)`.
    fn split(&self, amps: &[Vec<Vec<Complex<T>>>]) -> Vec<(T, T)> {
        self.receivers
            .iter()
            .zip(amps)
            .map(|(rcv, a)| {
                let mut s = T::zero();
                let mut i = self.noise;
                for (term, at) in rcv.terms.iter().zip(a) {
                    let g = self.p_ap * Self::mean_power(at);
                    if term.signal {
                        s += g;
                    } else {
                        i += g;
                    }
                }
                (s, i)
            })
            .collect()
    }

    /// Per-user rates in bits/s/Hz.
    pub fn rates(&self, theta: &[T]) -> Result<Vec<T>> {
        self.check(theta)?;
        let amps = self.amplitudes(theta)?;
        Ok(self
            .split(&amps)
            .into_iter()
            .map(|(s, i)| (T::one() + s / i).log2())
            .collect())
    }
}

impl<T: Real> PhaseObjective<T> for DlProblem<T> {
    fn dimension(&self) -> usize {
        self.channels.n_elements()
    }

    fn value(&self, theta: &[T]) -> Result<T> {
        Ok(self.rates(theta)?.into_iter().fold(T::zero(), |a, b| a + b))
    }

    fn value_and_gradient(&self, theta: &[T]) -> Result<(T, Vec<T>)> {
        self.check(theta)?;
        let m_count = theta.len();
        let amps = self.amplitudes(theta)?;
        let parts = self.split(&amps);
        let phi: Vec<Complex<T>> = theta.iter().map(|t| cis(*t)).collect();
        let ln2 = lit::<T>(2.0).ln();
        let mut value = T::zero();
        let mut grad = vec![T::zero(); m_count];
        for ((rcv, a), (s, i)) in self.receivers.iter().zip(&amps).zip(parts) {
            value += (T::one() + s / i).log2();
            let scale = self.p_ap / count(a.first().map_or(1, Vec::len).max(1));
            let mut ds = vec![T::zero(); m_count];
            let mut di = vec![T::zero(); m_count];
            for (term, at) in rcv.terms.iter().zip(a) {
                let acc = if term.signal { &mut ds } else { &mut di };
                for m in 0..m_count {
                    let mut d = T::zero();
                    for (n, an) in at.iter().enumerate() {
                        let kappa = rcv.rx[m][n] * term.tx[m][n];
                        let z = an.conj() * phi[m] * kappa;
                        // Re(j z) = -Im(z).
                        d -= z.im;
                    }
                    ops::record(at.len());
                    acc[m] += lit::<T>(2.0) * scale * d;
                }
            }
            for m in 0..m_count {
                grad[m] += ((ds[m] + di[m]) / (s + i) - di[m] / i) / ln2;
            }
        }
        Ok((value, grad))
    }
}

/// Gradient of the served users' DL sum rate (bits/s/Hz) with respect to
/// the phase angles, for fixed beams.
pub fn rate_gradient_wrt_phases<T: Real>(
    scenario: &Scenario<T>,
    channels: &ChannelSet<T>,
    beams: &BeamMap<T>,
    serving: &[Option<usize>],
    phases: &PhaseShiftMatrix<T>,
) -> Result<Vec<T>> {
    let p = &scenario.params;
    let problem = DlProblem::new(channels, beams, serving, p.p_ap, p.noise_power)?;
    Ok(problem.value_and_gradient(&phases.phases)?.1)
}

/// Closed-form optimum magnitude of `h0 + sum_m g_m phi_m q_m` under
/// unit-modulus `phi`: every term rotated onto `h0`.
pub fn coherent_gain<T: Real>(h0: Complex<T>, g: &[Complex<T>], q: &[Complex<T>]) -> T {
    g.iter()
        .zip(q)
        .fold(norm_sqr(h0).sqrt(), |acc, (a, b)| acc + norm_sqr(*a * *b).sqrt())
}

/// Phases achieving [`coherent_gain`].
pub fn coherent_phases<T: Real>(h0: Complex<T>, g: &[Complex<T>], q: &[Complex<T>]) -> Vec<T> {
    let target = h0.im.atan2(h0.re);
    g.iter()
        .zip(q)
        .map(|(a, b)| {
            let c = *a * *b;
            target - c.im.atan2(c.re)
        })
        .collect()
}
