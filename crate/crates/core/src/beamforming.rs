//! Hybrid analog/digital beamforming.
//!
//! The analog stage is a frequency-flat codeword of unit-modulus phase
//! shifters scaled by `1/sqrt(N)`. The digital stage takes the dominant
//! singular vectors of the analog-projected channel on each subcarrier. The
//! total precoder is `F = P_A P_D` and the total combiner `W = G_A G_D`; the
//! effective channel is `W^H H F`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::array::ula_steering;
use crate::channel::ChannelTensor;
use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::{count, is_finite, lit, modulus, norm_sqr, Real};

/// Analog precoder (`N_t x N_rf`) or combiner (`N_r x RF`).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogBeamformer<T: Real> {
    pub matrix: DMatrix<Complex<T>>,
    pub codebook_id: String,
}

impl<T: Real> AnalogBeamformer<T> {
    /// Largest deviation of `|a_kl|^2` from `1/N`.
    pub fn max_modulus_error(&self) -> T {
        let target = T::one() / count::<T>(self.matrix.nrows());
        self.matrix
            .iter()
            .map(|z| (z.norm_sqr() - target).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Grid angle `-pi/2 + pi k / K`.
pub fn grid_angle<T: Real>(k: usize, grid: usize) -> T {
    -T::frac_pi_2() + T::pi() * count::<T>(k) / count::<T>(grid)
}

/// Codebook of `beam_grid` codewords with half-wavelength spacing.
pub fn build_analog_codebook<T: Real>(
    n_antennas: usize,
    n_rf: usize,
    beam_grid: usize,
) -> Result<Vec<AnalogBeamformer<T>>> {
    build_analog_codebook_with_spacing(n_antennas, n_rf, beam_grid, lit(0.5))
}

/// Codeword `k` stacks the steering columns of grid points `k, k+1, ...,
/// k+n_rf-1` (mod `beam_grid`).
pub fn build_analog_codebook_with_spacing<T: Real>(
    n_antennas: usize,
    n_rf: usize,
    beam_grid: usize,
    spacing_wavelengths: T,
) -> Result<Vec<AnalogBeamformer<T>>> {
    if n_antennas == 0 || n_rf == 0 || n_rf > n_antennas {
        return Err(Error::InvalidArgument(format!(
            "codebook needs 1 <= n_rf <= n_antennas, got n_rf = {n_rf}, n_antennas = {n_antennas}"
        )));
    }
    if beam_grid < n_rf {
        return Err(Error::InvalidArgument(format!(
            "beam grid {beam_grid} is smaller than n_rf = {n_rf}"
        )));
    }
    let scale = Complex::new(T::one() / count::<T>(n_antennas).sqrt(), T::zero());
    Ok((0..beam_grid)
        .map(|k| {
            let mut matrix = DMatrix::zeros(n_antennas, n_rf);
            for c in 0..n_rf {
                let angle = grid_angle::<T>((k + c) % beam_grid, beam_grid);
                let col = ula_steering(n_antennas, angle, spacing_wavelengths).entries * scale;
                matrix.set_column(c, &col);
            }
            AnalogBeamformer {
                matrix,
                codebook_id: format!("{n_antennas}x{n_rf}/{k}"),
            }
        })
        .collect())
}

fn check_dims(context: &'static str, expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::dims(
            context,
            format!("{}x{}", expected.0, expected.1),
            format!("{}x{}", got.0, got.1),
        ));
    }
    Ok(())
}

/// `H_D = G_A^H H P_A` per subcarrier.
pub fn project_channel<T: Real>(
    h: &ChannelTensor<T>,
    g_a: &AnalogBeamformer<T>,
    p_a: &AnalogBeamformer<T>,
) -> Result<ChannelTensor<T>> {
    let (nr, nt) = (h.rows(), h.cols());
    if g_a.matrix.nrows() != nr || p_a.matrix.nrows() != nt {
        return Err(Error::dims(
            "analog projection",
            format!("combiner {nr} rows, precoder {nt} rows"),
            format!("{} and {}", g_a.matrix.nrows(), p_a.matrix.nrows()),
        ));
    }
    let gh = g_a.matrix.adjoint();
    let (rfu, nrf) = (gh.nrows(), p_a.matrix.ncols());
    let per_subcarrier = h
        .per_subcarrier
        .iter()
        .map(|m| {
            ops::record(rfu * nr * nt + rfu * nt * nrf);
            &gh * m * &p_a.matrix
        })
        .collect();
    Ok(ChannelTensor {
        per_subcarrier,
        link: h.link,
        band: h.band,
    })
}

/// SVD `A = U diag(s) V^H` with descending singular values and each left
/// singular vector rotated so its largest-magnitude entry is real positive.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSvd<T: Real> {
    pub u: DMatrix<Complex<T>>,
    pub singular_values: DVector<T>,
    pub v: DMatrix<Complex<T>>,
}

impl<T: Real> OrderedSvd<T> {
    pub fn reconstruct(&self) -> DMatrix<Complex<T>> {
        let s = DMatrix::from_diagonal(&self.singular_values.map(|x| Complex::new(x, T::zero())));
        &self.u * s * self.v.adjoint()
    }
}

pub fn ordered_svd<T: Real>(a: &DMatrix<Complex<T>>) -> Result<OrderedSvd<T>> {
    if !a.iter().all(|z| is_finite(z.re) && is_finite(z.im)) {
        return Err(Error::NonFinite("SVD input"));
    }
    let (r, c) = a.shape();
    ops::record(r * c * r.min(c));
    let svd = a.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NonFinite("SVD factors")),
    };
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let v_full = v_t.adjoint();
    let mut uo = DMatrix::zeros(r, k);
    let mut vo = DMatrix::zeros(c, k);
    let mut so = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u.column(src).into_owned();
        let mut vcol = v_full.column(src).into_owned();
        let mut best = 0;
        for idx in 1..ucol.len() {
            if norm_sqr(ucol[idx]) > norm_sqr(ucol[best]) {
                best = idx;
            }
        }
        let pivot = ucol[best];
        let mag = modulus(pivot);
        if mag > T::zero() {
            let rot = pivot.conj() / Complex::new(mag, T::zero());
            ucol *= rot;
            vcol *= rot;
        }
        uo.set_column(dst, &ucol);
        vo.set_column(dst, &vcol);
        so[dst] = svd.singular_values[src];
    }
    Ok(OrderedSvd {
        u: uo,
        singular_values: so,
        v: vo,
    })
}

/// Per-subcarrier digital precoders (`N_rf x N_s`) and combiners
/// (`RF x N_s`), with the singular values of each projected channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalBeamformers<T: Real> {
    pub precoders: Vec<DMatrix<Complex<T>>>,
    pub combiners: Vec<DMatrix<Complex<T>>>,
    pub singular_values: Vec<DVector<T>>,
}

impl<T: Real> DigitalBeamformers<T> {
    /// Scales each `P_D` so that `||P_A P_D||_F^2 = power`.
    pub fn normalize_power(&mut self, p_a: &AnalogBeamformer<T>, power: T) -> Result<()> {
        for p_d in &mut self.precoders {
            check_dims("digital precoder", (p_a.matrix.ncols(), p_d.ncols()), p_d.shape())?;
            let f = &p_a.matrix * &*p_d;
            let energy = f.norm_squared();
            if energy > T::zero() {
                *p_d *= Complex::new((power / energy).sqrt(), T::zero());
            }
        }
        Ok(())
    }
}

/// Truncated-SVD digital beamformers: `P_D` and `G_D` are the first `n_s`
/// right and left singular vectors. Columns are unit norm; call
/// [`DigitalBeamformers::normalize_power`] to apply the AP power.
pub fn digital_beamformers_svd<T: Real>(h_d: &ChannelTensor<T>, n_s: usize) -> Result<DigitalBeamformers<T>> {
    let limit = h_d.rows().min(h_d.cols());
    if n_s == 0 || n_s > limit {
        return Err(Error::dims(
            "digital beamformer streams",
            format!("1..={limit}"),
            n_s.to_string(),
        ));
    }
    let mut out = DigitalBeamformers {
        precoders: Vec::with_capacity(h_d.n_sc()),
        combiners: Vec::with_capacity(h_d.n_sc()),
        singular_values: Vec::with_capacity(h_d.n_sc()),
    };
    for m in &h_d.per_subcarrier {
        let svd = ordered_svd(m)?;
        out.precoders.push(svd.v.columns(0, n_s).into_owned());
        out.combiners.push(svd.u.columns(0, n_s).into_owned());
        out.singular_values.push(svd.singular_values);
    }
    Ok(out)
}

/// `F_n = P_A P_D,n` and `W_n = G_A G_D,n`.
#[allow(clippy::type_complexity)]
pub fn combine_beamformers<T: Real>(
    p_a: &AnalogBeamformer<T>,
    p_d: &[DMatrix<Complex<T>>],
    g_a: &AnalogBeamformer<T>,
    g_d: &[DMatrix<Complex<T>>],
) -> Result<(Vec<DMatrix<Complex<T>>>, Vec<DMatrix<Complex<T>>>)> {
    if p_d.len() != g_d.len() {
        return Err(Error::dims(
            "beamformer subcarriers",
            p_d.len().to_string(),
            g_d.len().to_string(),
        ));
    }
    let mut f = Vec::with_capacity(p_d.len());
    let mut w = Vec::with_capacity(g_d.len());
    for (pd, gd) in p_d.iter().zip(g_d) {
        if pd.nrows() != p_a.matrix.ncols() || gd.nrows() != g_a.matrix.ncols() || pd.ncols() != gd.ncols() {
            return Err(Error::dims(
                "beamformer composition",
                format!("P_D {}xN_s, G_D {}xN_s", p_a.matrix.ncols(), g_a.matrix.ncols()),
                format!("{}x{} and {}x{}", pd.nrows(), pd.ncols(), gd.nrows(), gd.ncols()),
            ));
        }
        ops::record(p_a.matrix.nrows() * pd.nrows() * pd.ncols() + g_a.matrix.nrows() * gd.nrows() * gd.ncols());
        f.push(&p_a.matrix * pd);
        w.push(&g_a.matrix * gd);
    }
    Ok((f, w))
}

/// `W_n^H H_n F_n` per subcarrier.
pub fn effective_channel<T: Real>(
    h: &ChannelTensor<T>,
    f: &[DMatrix<Complex<T>>],
    w: &[DMatrix<Complex<T>>],
) -> Result<ChannelTensor<T>> {
    if f.len() != h.n_sc() || w.len() != h.n_sc() {
        return Err(Error::dims(
            "effective channel subcarriers",
            h.n_sc().to_string(),
            format!("{} and {}", f.len(), w.len()),
        ));
    }
    let mut per_subcarrier = Vec::with_capacity(h.n_sc());
    for ((m, fn_), wn) in h.per_subcarrier.iter().zip(f).zip(w) {
        if wn.nrows() != m.nrows() || fn_.nrows() != m.ncols() {
            return Err(Error::dims(
                "effective channel",
                format!("W {} rows, F {} rows", m.nrows(), m.ncols()),
                format!("{} and {}", wn.nrows(), fn_.nrows()),
            ));
        }
        ops::record(wn.ncols() * m.nrows() * m.ncols() + wn.ncols() * m.ncols() * fn_.ncols());
        per_subcarrier.push(wn.adjoint() * m * fn_);
    }
    Ok(ChannelTensor {
        per_subcarrier,
        link: h.link,
        band: h.band,
    })
}

/// Index pair `(ap codeword, user codeword)` maximizing
/// `sum_n ||G^H H_n P||_F^2`; the lowest index wins ties.
pub fn select_codewords<T: Real>(
    h: &ChannelTensor<T>,
    ap_book: &[AnalogBeamformer<T>],
    user_book: &[AnalogBeamformer<T>],
) -> Result<(usize, usize)> {
    let mut best: Option<(T, usize, usize)> = None;
    for (ui, g) in user_book.iter().enumerate() {
        for (ai, p) in ap_book.iter().enumerate() {
            let hd = project_channel(h, g, p)?;
            let energy = hd
                .per_subcarrier
                .iter()
                .fold(T::zero(), |acc, m| acc + m.norm_squared());
            if best.as_ref().is_none_or(|(e, _, _)| energy > *e) {
                best = Some((energy, ai, ui));
            }
        }
    }
    best.map(|(_, a, u)| (a, u))
        .ok_or_else(|| Error::InvalidArgument("empty codebook".into()))
}

/// Analog and per-subcarrier digital beamformers of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet<T: Real> {
    pub analog_precoder: AnalogBeamformer<T>,
    pub analog_combiner: AnalogBeamformer<T>,
    pub digital_precoders: Vec<DMatrix<Complex<T>>>,
    pub digital_combiners: Vec<DMatrix<Complex<T>>>,
}

impl<T: Real> BeamformerSet<T> {
    /// Codeword selection, projection, SVD and power normalization.
    pub fn design(
        h: &ChannelTensor<T>,
        ap_book: &[AnalogBeamformer<T>],
        user_book: &[AnalogBeamformer<T>],
        n_s: usize,
        power: T,
    ) -> Result<Self> {
        let (a, u) = select_codewords(h, ap_book, user_book)?;
        Self::design_with(h, &ap_book[a], &user_book[u], n_s, power)
    }

    /// Digital stage for fixed analog codewords.
    pub fn design_with(
        h: &ChannelTensor<T>,
        p_a: &AnalogBeamformer<T>,
        g_a: &AnalogBeamformer<T>,
        n_s: usize,
        power: T,
    ) -> Result<Self> {
        let h_d = project_channel(h, g_a, p_a)?;
        let mut digital = digital_beamformers_svd(&h_d, n_s)?;
        digital.normalize_power(p_a, power)?;
        Ok(Self {
            analog_precoder: p_a.clone(),
            analog_combiner: g_a.clone(),
            digital_precoders: digital.precoders,
            digital_combiners: digital.combiners,
        })
    }

    /// Total precoders `F_n` and combiners `W_n`.
    #[allow(clippy::type_complexity)]
    pub fn totals(&self) -> Result<(Vec<DMatrix<Complex<T>>>, Vec<DMatrix<Complex<T>>>)> {
        combine_beamformers(
            &self.analog_precoder,
            &self.digital_precoders,
            &self.analog_combiner,
            &self.digital_combiners,
        )
    }

    pub fn codebook_ids(&self) -> (String, String) {
        (
            self.analog_precoder.codebook_id.clone(),
            self.analog_combiner.codebook_id.clone(),
        )
    }
}
