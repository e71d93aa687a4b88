//! UL and DL channel synthesis.
//!
//! Every link is a rank-one outer product of receive and transmit steering
//! vectors scaled by a log-distance amplitude and a per-subcarrier delay
//! factor. The cascaded IRS path of element `m` is the product of the
//! AP-element and element-user links, weighted by `phi_m`.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::array::{angles_from_vector, ula_steering, upa_entry};
use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::{cis, count, is_finite, lit, modulus, Real};
use crate::scenario::{compute_dod_doa, DelayModel, IrsElement, Scenario, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Ul,
    Dl,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Ul => "ul",
            Band::Dl => "dl",
        })
    }
}

/// Node of the network; IRS elements use their flattened index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Ap(usize),
    User(usize),
    Irs(usize),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Ap(j) => write!(f, "ap{j}"),
            NodeId::User(i) => write!(f, "user{i}"),
            NodeId::Irs(m) => write!(f, "irs{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId {
    pub from: NodeId,
    pub to: NodeId,
}

impl LinkId {
    pub fn new(from: NodeId, to: NodeId) -> Self {
        Self { from, to }
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Per-subcarrier `rx_dim x tx_dim` matrices of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor<T: Real> {
    pub per_subcarrier: Vec<DMatrix<Complex<T>>>,
    pub link: LinkId,
    pub band: Band,
}

impl<T: Real> ChannelTensor<T> {
    pub fn zeros(link: LinkId, band: Band, n_sc: usize, rows: usize, cols: usize) -> Self {
        Self {
            per_subcarrier: vec![DMatrix::zeros(rows, cols); n_sc],
            link,
            band,
        }
    }

    pub fn n_sc(&self) -> usize {
        self.per_subcarrier.len()
    }

    pub fn rows(&self) -> usize {
        self.per_subcarrier.first().map_or(0, |m| m.nrows())
    }

    pub fn cols(&self) -> usize {
        self.per_subcarrier.first().map_or(0, |m| m.ncols())
    }

    /// Shared dimensions and finite entries.
    pub fn validate(&self) -> Result<()> {
        let (r, c) = (self.rows(), self.cols());
        for m in &self.per_subcarrier {
            if m.shape() != (r, c) {
                return Err(Error::dims(
                    "channel tensor",
                    format!("{r}x{c}"),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
            if !m.iter().all(|z| is_finite(z.re) && is_finite(z.im)) {
                return Err(Error::NonFinite("channel tensor"));
            }
        }
        Ok(())
    }
}

/// Diagonal IRS reflection matrix stored as phase angles, so every
/// coefficient `e^{j theta_m}` has unit modulus by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShiftMatrix<T: Real> {
    pub phases: Vec<T>,
}

impl<T: Real> PhaseShiftMatrix<T> {
    pub fn new(phases: Vec<T>) -> Self {
        Self { phases }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            phases: vec![T::zero(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn coefficient(&self, m: usize) -> Complex<T> {
        cis(self.phases[m])
    }

    pub fn coefficients(&self) -> Vec<Complex<T>> {
        self.phases.iter().map(|&t| cis(t)).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<Complex<T>> {
        DMatrix::from_diagonal(&DVector::from_vec(self.coefficients()))
    }

    /// `max_m | |phi_m| - 1 |`.
    pub fn max_modulus_error(&self) -> T {
        self.coefficients()
            .iter()
            .map(|c| (modulus(*c) - T::one()).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Free-space loss at 1 m: `20 log10(4 pi f / c)`.
pub fn reference_loss_db<T: Real>(carrier: T) -> T {
    lit::<T>(20.0) * (lit::<T>(4.0) * T::pi() * carrier / lit(SPEED_OF_LIGHT)).log10()
}

/// Log-distance path gain `-(PL0 + 10 w log10 d)` in dB with `d0 = 1 m`.
pub fn path_gain_db<T: Real>(distance: T, carrier: T, w: T) -> Result<T> {
    if !(distance > T::zero()) {
        return Err(Error::NonPositiveDistance(crate::scalar::to_f64(distance)));
    }
    Ok(-(reference_loss_db(carrier) + lit::<T>(10.0) * w * distance.log10()))
}

/// Amplitude gain `10^(g/20)`; `-inf` dB gives exactly zero.
pub fn amplitude_from_db<T: Real>(gain_db: T) -> T {
    lit::<T>(10.0).powf(gain_db / lit(20.0))
}

pub fn propagation_delay<T: Real>(distance: T) -> T {
    distance / lit(SPEED_OF_LIGHT)
}

/// `f_n = fc + (n - (N - 1) / 2) * B / N`.
pub fn subcarrier_frequencies<T: Real>(carrier: T, bandwidth: T, n_sc: usize) -> Vec<T> {
    let n = count::<T>(n_sc);
    let centre = (n - T::one()) / lit(2.0);
    (0..n_sc)
        .map(|k| carrier + (count::<T>(k) - centre) * bandwidth / n)
        .collect()
}

pub fn delay_factor<T: Real>(model: DelayModel<T>, frequency: T, tau: T) -> Complex<T> {
    match model {
        DelayModel::Phasor => cis(-T::two_pi() * frequency * tau),
        DelayModel::RealDecay { t } => Complex::new((-t / tau).exp(), T::zero()),
    }
}

/// CN(0, 1) small-scale factor of the direct user-AP link, drawn from a
/// dedicated stream so it does not depend on the IRS size.
pub fn fading_factor<T: Real>(seed: u64, band: Band, user: usize, ap: usize) -> Complex<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band_bit: u64 = match band {
        Band::Ul => 1,
        Band::Dl => 0,
    };
    rng.set_stream((band_bit << 48) | ((user as u64) << 24) | ap as u64);
    let re: f64 = StandardNormal.sample(&mut rng);
    let im: f64 = StandardNormal.sample(&mut rng);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(lit(re * s), lit(im * s))
}

/// Rank-one link `amplitude * scale * delay(f_n, tau) * rx tx^H` per subcarrier.
#[allow(clippy::too_many_arguments)]
pub fn rank_one_link<T: Real>(
    link: LinkId,
    band: Band,
    rx: &DVector<Complex<T>>,
    tx: &DVector<Complex<T>>,
    amplitude: T,
    scale: Complex<T>,
    tau: T,
    frequencies: &[T],
    model: DelayModel<T>,
) -> ChannelTensor<T> {
    let outer = rx * tx.adjoint();
    let per_subcarrier = frequencies
        .iter()
        .map(|&f| {
            let g = delay_factor(model, f, tau) * scale * Complex::new(amplitude, T::zero());
            outer.map(|z| z * g)
        })
        .collect();
    ChannelTensor {
        per_subcarrier,
        link,
        band,
    }
}

struct BandSetup<T: Real> {
    band: Band,
    carrier: T,
    frequencies: Vec<T>,
    /// AP and user element spacing in wavelengths of this band.
    node_spacing: T,
}

fn band_setup<T: Real>(scenario: &Scenario<T>, band: Band) -> BandSetup<T> {
    let p = &scenario.params;
    let carrier = match band {
        Band::Dl => p.carrier_dl,
        Band::Ul => p.carrier_ul,
    };
    // Node arrays are laid out at half the DL wavelength.
    let node_spacing = (p.wavelength_dl() / lit(2.0)) / (lit::<T>(SPEED_OF_LIGHT) / carrier);
    BandSetup {
        band,
        carrier,
        frequencies: subcarrier_frequencies(carrier, p.bandwidth, p.n_sc),
        node_spacing,
    }
}

fn element_entry<T: Real>(
    scenario: &Scenario<T>,
    e: &IrsElement<T>,
    direction: &Vector3<T>,
    carrier: T,
) -> Result<DVector<Complex<T>>> {
    let (az, el) = angles_from_vector(direction)?;
    let spacing = scenario.irs_panels[e.panel].spacing / (lit::<T>(SPEED_OF_LIGHT) / carrier);
    Ok(DVector::from_element(1, upa_entry(e.a, e.b, az, el, spacing)))
}

fn element<T: Real>(scenario: &Scenario<T>, panel: usize, index: usize) -> Result<IrsElement<T>> {
    let p = scenario
        .irs_panels
        .get(panel)
        .ok_or_else(|| Error::InvalidArgument(format!("IRS panel {panel} does not exist")))?;
    if index >= p.element_count() {
        return Err(Error::InvalidArgument(format!(
            "IRS panel {panel} has no element {index}"
        )));
    }
    let (a, b) = p.element_coords(index);
    Ok(IrsElement {
        panel,
        index,
        a,
        b,
        position: p.element_position(index),
    })
}

fn flat_index<T: Real>(scenario: &Scenario<T>, e: &IrsElement<T>) -> usize {
    scenario.irs_panels[..e.panel]
        .iter()
        .map(|p| p.element_count())
        .sum::<usize>()
        + e.index
}

fn check_node(kind: &str, id: usize, len: usize) -> Result<()> {
    if id >= len {
        return Err(Error::InvalidArgument(format!("{kind} {id} does not exist")));
    }
    Ok(())
}

fn ap_irs<T: Real>(s: &Scenario<T>, setup: &BandSetup<T>, ap: usize, e: &IrsElement<T>) -> Result<ChannelTensor<T>> {
    let p = &s.params;
    let (dod, doa) = compute_dod_doa(&s.ap_positions[ap], &e.position)?;
    let d = dod.norm();
    let amplitude = amplitude_from_db(path_gain_db(d, setup.carrier, p.pathloss_exponent)?);
    let (az_tx, _) = angles_from_vector(&dod)?;
    let tx = ula_steering(p.n_t, az_tx, setup.node_spacing).entries;
    let rx = element_entry(s, e, &doa, setup.carrier)?;
    let link = LinkId::new(NodeId::Ap(ap), NodeId::Irs(flat_index(s, e)));
    let mut t = rank_one_link(
        link,
        setup.band,
        &rx,
        &tx,
        amplitude,
        Complex::new(T::one(), T::zero()),
        propagation_delay(d),
        &setup.frequencies,
        p.delay_model,
    );
    if setup.band == Band::Ul {
        // UL runs element -> AP: N_t x 1.
        t = transpose_link(t, LinkId::new(link.to, link.from));
    }
    Ok(t)
}

fn irs_user<T: Real>(
    s: &Scenario<T>,
    setup: &BandSetup<T>,
    e: &IrsElement<T>,
    user: usize,
) -> Result<ChannelTensor<T>> {
    let p = &s.params;
    let (dod, doa) = compute_dod_doa(&e.position, &s.user_positions[user])?;
    let d = dod.norm();
    let amplitude = amplitude_from_db(path_gain_db(d, setup.carrier, p.pathloss_exponent)?);
    let tx = element_entry(s, e, &dod, setup.carrier)?;
    let (az_rx, _) = angles_from_vector(&doa)?;
    let rx = ula_steering(p.n_r, az_rx, setup.node_spacing).entries;
    let link = LinkId::new(NodeId::Irs(flat_index(s, e)), NodeId::User(user));
    let mut t = rank_one_link(
        link,
        setup.band,
        &rx,
        &tx,
        amplitude,
        Complex::new(T::one(), T::zero()),
        propagation_delay(d),
        &setup.frequencies,
        p.delay_model,
    );
    if setup.band == Band::Ul {
        // UL runs user -> element: 1 x N_r.
        t = transpose_link(t, LinkId::new(link.to, link.from));
    }
    Ok(t)
}

fn direct<T: Real>(
    s: &Scenario<T>,
    setup: &BandSetup<T>,
    user: usize,
    ap: usize,
    penalty_db: T,
    fading: Complex<T>,
) -> Result<ChannelTensor<T>> {
    let p = &s.params;
    let (dod, doa) = compute_dod_doa(&s.ap_positions[ap], &s.user_positions[user])?;
    let d = dod.norm();
    let amplitude = amplitude_from_db(path_gain_db(d, setup.carrier, p.pathloss_exponent)? - penalty_db);
    let (az_tx, _) = angles_from_vector(&dod)?;
    let (az_rx, _) = angles_from_vector(&doa)?;
    let tx = ula_steering(p.n_t, az_tx, setup.node_spacing).entries;
    let rx = ula_steering(p.n_r, az_rx, setup.node_spacing).entries;
    let link = LinkId::new(NodeId::Ap(ap), NodeId::User(user));
    let t = rank_one_link(
        link,
        setup.band,
        &rx,
        &tx,
        amplitude,
        fading,
        propagation_delay(d),
        &setup.frequencies,
        p.delay_model,
    );
    Ok(match setup.band {
        Band::Dl => t,
        Band::Ul => transpose_link(t, LinkId::new(link.to, link.from)),
    })
}

/// Reciprocal link: plain transpose of every subcarrier matrix.
fn transpose_link<T: Real>(t: ChannelTensor<T>, link: LinkId) -> ChannelTensor<T> {
    ChannelTensor {
        per_subcarrier: t.per_subcarrier.into_iter().map(|m| m.transpose()).collect(),
        link,
        band: t.band,
    }
}

/// AP `ap` to IRS element, `1 x N_t` per subcarrier.
pub fn dl_ap_irs_channel<T: Real>(
    scenario: &Scenario<T>,
    ap: usize,
    panel: usize,
    index: usize,
) -> Result<ChannelTensor<T>> {
    check_node("AP", ap, scenario.n_aps())?;
    let e = element(scenario, panel, index)?;
    ap_irs(scenario, &band_setup(scenario, Band::Dl), ap, &e)
}

/// IRS element to user, `N_r x 1` per subcarrier.
pub fn dl_irs_user_channel<T: Real>(
    scenario: &Scenario<T>,
    panel: usize,
    index: usize,
    user: usize,
) -> Result<ChannelTensor<T>> {
    check_node("user", user, scenario.n_users())?;
    let e = element(scenario, panel, index)?;
    irs_user(scenario, &band_setup(scenario, Band::Dl), &e, user)
}

/// Direct AP-user link with the NLoS penalty and small-scale factor `fading`,
/// `N_r x N_t` per subcarrier.
pub fn dl_nlos_channel<T: Real>(
    scenario: &Scenario<T>,
    user: usize,
    ap: usize,
    fading: Complex<T>,
) -> Result<ChannelTensor<T>> {
    check_node("user", user, scenario.n_users())?;
    check_node("AP", ap, scenario.n_aps())?;
    direct(
        scenario,
        &band_setup(scenario, Band::Dl),
        user,
        ap,
        scenario.params.nlos_penalty_db,
        fading,
    )
}

/// Direct AP-user link without penalty or fading.
pub fn dl_los_channel<T: Real>(scenario: &Scenario<T>, user: usize, ap: usize) -> Result<ChannelTensor<T>> {
    check_node("user", user, scenario.n_users())?;
    check_node("AP", ap, scenario.n_aps())?;
    direct(
        scenario,
        &band_setup(scenario, Band::Dl),
        user,
        ap,
        T::zero(),
        Complex::new(T::one(), T::zero()),
    )
}

/// User to IRS element on the UL carrier, `1 x N_r`.
pub fn ul_user_irs_channel<T: Real>(
    scenario: &Scenario<T>,
    user: usize,
    panel: usize,
    index: usize,
) -> Result<ChannelTensor<T>> {
    check_node("user", user, scenario.n_users())?;
    let e = element(scenario, panel, index)?;
    irs_user(scenario, &band_setup(scenario, Band::Ul), &e, user)
}

/// IRS element to AP on the UL carrier, `N_t x 1`.
pub fn ul_irs_ap_channel<T: Real>(
    scenario: &Scenario<T>,
    panel: usize,
    index: usize,
    ap: usize,
) -> Result<ChannelTensor<T>> {
    check_node("AP", ap, scenario.n_aps())?;
    let e = element(scenario, panel, index)?;
    ap_irs(scenario, &band_setup(scenario, Band::Ul), ap, &e)
}

/// Direct user-AP UL link, `N_t x N_r`.
pub fn ul_nlos_channel<T: Real>(
    scenario: &Scenario<T>,
    user: usize,
    ap: usize,
    fading: Complex<T>,
) -> Result<ChannelTensor<T>> {
    check_node("user", user, scenario.n_users())?;
    check_node("AP", ap, scenario.n_aps())?;
    direct(
        scenario,
        &band_setup(scenario, Band::Ul),
        user,
        ap,
        scenario.params.nlos_penalty_db,
        fading,
    )
}

fn check_cascade<T: Real>(
    nlos: &ChannelTensor<T>,
    first: &[ChannelTensor<T>],
    second: &[ChannelTensor<T>],
    phi: &PhaseShiftMatrix<T>,
    context: &'static str,
) -> Result<()> {
    if first.len() != phi.len() || second.len() != phi.len() {
        return Err(Error::dims(
            context,
            format!("{} IRS elements", phi.len()),
            format!("{} and {}", first.len(), second.len()),
        ));
    }
    for t in first.iter().chain(second) {
        if t.n_sc() != nlos.n_sc() {
            return Err(Error::dims(
                context,
                format!("{} subcarriers", nlos.n_sc()),
                format!("{}", t.n_sc()),
            ));
        }
    }
    Ok(())
}

fn cascade<T: Real>(
    nlos: &ChannelTensor<T>,
    left: &[ChannelTensor<T>],
    right: &[ChannelTensor<T>],
    phi: &PhaseShiftMatrix<T>,
    context: &'static str,
) -> Result<ChannelTensor<T>> {
    check_cascade(nlos, left, right, phi, context)?;
    let (rows, cols) = (nlos.rows(), nlos.cols());
    for (l, r) in left.iter().zip(right) {
        if l.rows() != rows || r.cols() != cols || l.cols() != r.rows() {
            return Err(Error::dims(
                context,
                format!("{rows}x{cols} cascade"),
                format!("({}x{})({}x{})", l.rows(), l.cols(), r.rows(), r.cols()),
            ));
        }
    }
    let coeffs = phi.coefficients();
    let mut out = nlos.clone();
    for (n, h) in out.per_subcarrier.iter_mut().enumerate() {
        for m in 0..coeffs.len() {
            let l = &left[m].per_subcarrier[n];
            let r = &right[m].per_subcarrier[n];
            let lw = l.map(|z| z * coeffs[m]);
            *h += lw * r;
            ops::record(rows * cols * l.ncols());
        }
    }
    Ok(out)
}

/// `H = h_nlos + sum_m h_{m,i} phi_m h_{j,m}` with `h_{j,m}` of shape
/// `1 x N_t` (AP to element) and `h_{m,i}` of shape `N_r x 1`.
pub fn dl_composite_channel<T: Real>(
    nlos: &ChannelTensor<T>,
    ap_irs: &[ChannelTensor<T>],
    irs_user: &[ChannelTensor<T>],
    phi: &PhaseShiftMatrix<T>,
) -> Result<ChannelTensor<T>> {
    cascade(nlos, irs_user, ap_irs, phi, "DL composite channel")
}

/// `H = h_nlos + sum_m h_{m,j} phi_m h_{i,m}` with `h_{i,m}` of shape
/// `1 x N_r` (user to element) and `h_{m,j}` of shape `N_t x 1`.
pub fn ul_composite_channel<T: Real>(
    nlos: &ChannelTensor<T>,
    user_irs: &[ChannelTensor<T>],
    irs_ap: &[ChannelTensor<T>],
    phi: &PhaseShiftMatrix<T>,
) -> Result<ChannelTensor<T>> {
    cascade(nlos, irs_ap, user_irs, phi, "UL composite channel")
}

/// Every link of a scenario, for both bands.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    pub n_sc: usize,
    pub n_t: usize,
    pub n_r: usize,
    /// `[user][ap]`, `N_r x N_t`.
    pub dl_nlos: Vec<Vec<ChannelTensor<T>>>,
    /// `[ap][m]`, `1 x N_t`.
    pub dl_ap_irs: Vec<Vec<ChannelTensor<T>>>,
    /// `[user][m]`, `N_r x 1`.
    pub dl_irs_user: Vec<Vec<ChannelTensor<T>>>,
    /// `[user][ap]`, `N_t x N_r`.
    pub ul_nlos: Vec<Vec<ChannelTensor<T>>>,
    /// `[user][m]`, `1 x N_r`.
    pub ul_user_irs: Vec<Vec<ChannelTensor<T>>>,
    /// `[ap][m]`, `N_t x 1`.
    pub ul_irs_ap: Vec<Vec<ChannelTensor<T>>>,
}

impl<T: Real> ChannelSet<T> {
    pub fn n_users(&self) -> usize {
        self.dl_nlos.len()
    }

    pub fn n_aps(&self) -> usize {
        self.dl_ap_irs.len()
    }

    pub fn n_elements(&self) -> usize {
        self.dl_ap_irs.first().map_or(0, Vec::len)
    }

    pub fn dl_composite(&self, user: usize, ap: usize, phi: &PhaseShiftMatrix<T>) -> Result<ChannelTensor<T>> {
        let nlos = self
            .dl_nlos
            .get(user)
            .and_then(|r| r.get(ap))
            .ok_or_else(|| Error::MissingChannel(format!("dl ap{ap}->user{user}")))?;
        dl_composite_channel(nlos, &self.dl_ap_irs[ap], &self.dl_irs_user[user], phi)
    }

    pub fn ul_composite(&self, user: usize, ap: usize, phi: &PhaseShiftMatrix<T>) -> Result<ChannelTensor<T>> {
        let nlos = self
            .ul_nlos
            .get(user)
            .and_then(|r| r.get(ap))
            .ok_or_else(|| Error::MissingChannel(format!("ul user{user}->ap{ap}")))?;
        ul_composite_channel(nlos, &self.ul_user_irs[user], &self.ul_irs_ap[ap], phi)
    }

    /// Every stored tensor, in a fixed order.
    pub fn tensors(&self) -> impl Iterator<Item = &ChannelTensor<T>> {
        [
            &self.dl_nlos,
            &self.dl_ap_irs,
            &self.dl_irs_user,
            &self.ul_nlos,
            &self.ul_user_irs,
            &self.ul_irs_ap,
        ]
        .into_iter()
        .flat_map(|v| v.iter().flatten())
    }
}

/// Synthesizes all links; `seed` fixes the small-scale factors.
pub fn synthesize_channels<T: Real>(scenario: &Scenario<T>, seed: u64) -> Result<ChannelSet<T>> {
    let dl = band_setup(scenario, Band::Dl);
    let ul = band_setup(scenario, Band::Ul);
    let elements = scenario.irs_elements();
    let p = &scenario.params;
    let fading = |band, i, j| {
        if p.small_scale_fading {
            fading_factor(seed, band, i, j)
        } else {
            Complex::new(T::one(), T::zero())
        }
    };
    let users = 0..scenario.n_users();
    let aps = 0..scenario.n_aps();

    let per_pair = |setup: &BandSetup<T>| -> Result<Vec<Vec<ChannelTensor<T>>>> {
        users
            .clone()
            .map(|i| {
                aps.clone()
                    .map(|j| direct(scenario, setup, i, j, p.nlos_penalty_db, fading(setup.band, i, j)))
                    .collect()
            })
            .collect()
    };
    let per_ap = |setup: &BandSetup<T>| -> Result<Vec<Vec<ChannelTensor<T>>>> {
        aps.clone()
            .map(|j| elements.iter().map(|e| ap_irs(scenario, setup, j, e)).collect())
            .collect()
    };
    let per_user = |setup: &BandSetup<T>| -> Result<Vec<Vec<ChannelTensor<T>>>> {
        users
            .clone()
            .map(|i| elements.iter().map(|e| irs_user(scenario, setup, e, i)).collect())
            .collect()
    };

    let set = ChannelSet {
        n_sc: p.n_sc,
        n_t: p.n_t,
        n_r: p.n_r,
        dl_nlos: per_pair(&dl)?,
        dl_ap_irs: per_ap(&dl)?,
        dl_irs_user: per_user(&dl)?,
        ul_nlos: per_pair(&ul)?,
        ul_user_irs: per_user(&ul)?,
        ul_irs_ap: per_ap(&ul)?,
    };
    for t in set.tensors() {
        t.validate()?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioDocument;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn scalar_tensor(values: &[Complex<f64>], from: NodeId, to: NodeId) -> ChannelTensor<f64> {
        ChannelTensor {
            per_subcarrier: values.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            link: LinkId::new(from, to),
            band: Band::Dl,
        }
    }

    #[test]
    fn path_gain_examples() {
        let pl0: f64 = reference_loss_db(60e9);
        assert_eq!(path_gain_db(1.0, 60e9, 4.6).unwrap(), -pl0);
        let g2 = path_gain_db(2.0, 60e9, 4.6).unwrap();
        assert!((g2 - (-pl0 - 13.848)).abs() < 1e-3, "{g2}");
        assert!(path_gain_db(0.0, 60e9, 4.6).is_err());
        assert!(path_gain_db(-1.0, 60e9, 4.6).is_err());
        assert_eq!(Scenario::<f64>::default_indoor().params.pathloss_exponent, 4.6);
    }

    #[test]
    fn delay_and_grid() {
        let tau: f64 = propagation_delay(3.0);
        assert!((tau - 1.0007e-8).abs() < 1e-12);
        let f = subcarrier_frequencies(10.0, 4.0, 4);
        assert_eq!(f, vec![8.5, 9.5, 10.5, 11.5]);
        assert_eq!(subcarrier_frequencies(10.0, 4.0, 1), vec![10.0]);
    }

    #[test]
    fn zero_gain_is_zero_matrix() {
        let rx = DVector::from_element(2, c(1.0, 0.0));
        let tx = DVector::from_element(3, c(0.0, 1.0));
        let t = rank_one_link(
            LinkId::new(NodeId::Ap(0), NodeId::Irs(0)),
            Band::Dl,
            &rx,
            &tx,
            amplitude_from_db(f64::NEG_INFINITY),
            c(1.0, 0.0),
            1e-8,
            &[60e9, 61e9],
            DelayModel::Phasor,
        );
        assert!(t.per_subcarrier.iter().all(|m| m.iter().all(|z| *z == c(0.0, 0.0))));
    }

    #[test]
    fn collocated_broadside_magnitude() {
        let rx = DVector::from_element(1, c(1.0, 0.0));
        let tx = DVector::from_element(4, c(1.0, 0.0));
        let pl0: f64 = reference_loss_db(60e9);
        let amp = amplitude_from_db(path_gain_db(1.0, 60e9, 4.6).unwrap());
        let t = rank_one_link(
            LinkId::new(NodeId::Ap(0), NodeId::Irs(0)),
            Band::Dl,
            &rx,
            &tx,
            amp,
            c(1.0, 0.0),
            propagation_delay(1.0),
            &[60e9],
            DelayModel::Phasor,
        );
        for z in t.per_subcarrier[0].iter() {
            assert!((z.norm() - 10f64.powf(-pl0 / 20.0)).abs() < 1e-18);
        }
    }

    #[test]
    fn shapes_follow_band_conventions() {
        let s = Scenario::<f64>::default_indoor();
        let p = &s.params;
        assert_eq!(
            dl_ap_irs_channel(&s, 0, 0, 3).unwrap().per_subcarrier[0].shape(),
            (1, p.n_t)
        );
        assert_eq!(
            dl_irs_user_channel(&s, 0, 3, 1).unwrap().per_subcarrier[0].shape(),
            (1, 1)
        );
        let nlos = dl_nlos_channel(&s, 1, 0, c(1.0, 0.0)).unwrap();
        assert_eq!(nlos.n_sc(), p.n_sc);
        assert_eq!(nlos.per_subcarrier[0].shape(), (p.n_r, p.n_t));
        assert_eq!(
            ul_user_irs_channel(&s, 0, 0, 2).unwrap().per_subcarrier[0].shape(),
            (1, p.n_r)
        );
        assert_eq!(
            ul_irs_ap_channel(&s, 0, 2, 1).unwrap().per_subcarrier[0].shape(),
            (p.n_t, 1)
        );
        assert_eq!(
            ul_nlos_channel(&s, 0, 1, c(1.0, 0.0)).unwrap().per_subcarrier[0].shape(),
            (p.n_t, p.n_r)
        );
    }

    #[test]
    fn nlos_penalty() {
        let mut doc = ScenarioDocument::default_indoor();
        doc.system.nlos_penalty_db = 0.0;
        let s0 = Scenario::<f64>::from_document(&doc).unwrap();
        let one = c(1.0, 0.0);
        assert_eq!(
            dl_nlos_channel(&s0, 2, 1, one).unwrap(),
            dl_los_channel(&s0, 2, 1).unwrap()
        );
        let s = Scenario::<f64>::default_indoor();
        let nlos = dl_nlos_channel(&s, 2, 1, one).unwrap();
        let los = dl_los_channel(&s, 2, 1).unwrap();
        for (a, b) in nlos.per_subcarrier.iter().zip(&los.per_subcarrier) {
            assert!(a.norm() < b.norm());
        }
    }

    #[test]
    fn magnitude_decreases_with_user_distance() {
        let mut last = f64::INFINITY;
        for k in 1..=10 {
            let mut doc = ScenarioDocument::default_indoor();
            doc.geometry.users[0] = [k as f64 * 0.9, 8.0, 1.2];
            let s = Scenario::<f64>::from_document(&doc).unwrap();
            let t = dl_irs_user_channel(&s, 0, 0, 0).unwrap();
            let mag = t.per_subcarrier[0][(0, 0)].norm();
            assert!(mag < last);
            last = mag;
        }
    }

    #[test]
    fn mirror_symmetric_links_have_equal_gain() {
        let mut doc = ScenarioDocument::default_indoor();
        doc.geometry.aps[0] = [2.0, 8.0, 1.2];
        doc.geometry.users[0] = [2.0, 8.0, 1.2];
        let s = Scenario::<f64>::from_document(&doc).unwrap();
        let a = dl_ap_irs_channel(&s, 0, 0, 5).unwrap().per_subcarrier[0][(0, 0)].norm();
        let b = dl_irs_user_channel(&s, 0, 5, 0).unwrap().per_subcarrier[0][(0, 0)].norm();
        assert!((a - b).abs() <= 1e-15 * a);
    }

    #[test]
    fn composite_edge_cases() {
        let n = NodeId::Ap(0);
        let u = NodeId::User(0);
        let nlos = scalar_tensor(&[c(0.3, -0.1)], n, u);
        let phi = PhaseShiftMatrix::<f64>::zeros(0);
        assert_eq!(dl_composite_channel(&nlos, &[], &[], &phi).unwrap(), nlos);

        let zero = scalar_tensor(&[c(0.0, 0.0)], n, u);
        let h = scalar_tensor(&[c(0.5, 0.2)], n, NodeId::Irs(0));
        let g = scalar_tensor(&[c(-0.1, 0.7)], NodeId::Irs(0), u);
        let out = dl_composite_channel(
            &zero,
            std::slice::from_ref(&h),
            std::slice::from_ref(&g),
            &PhaseShiftMatrix::zeros(1),
        )
        .unwrap();
        assert!((out.per_subcarrier[0][(0, 0)] - c(0.5, 0.2) * c(-0.1, 0.7)).norm() < 1e-15);

        assert!(dl_composite_channel(&zero, &[h], &[g], &PhaseShiftMatrix::zeros(2)).is_err());
    }

    #[test]
    fn composite_scalar_oracle() {
        let n = NodeId::Ap(0);
        let u = NodeId::User(0);
        let h0 = c(0.1, 0.2);
        let a = [c(0.3, -0.4), c(-1.1, 0.5), c(0.2, 0.9)];
        let b = [c(0.7, 0.1), c(0.05, -0.3), c(-0.6, -0.2)];
        let th = [0.4, -2.0, 2.9];
        let nlos = scalar_tensor(&[h0], n, u);
        let ap: Vec<_> = a.iter().map(|&v| scalar_tensor(&[v], n, NodeId::Irs(0))).collect();
        let us: Vec<_> = b.iter().map(|&v| scalar_tensor(&[v], NodeId::Irs(0), u)).collect();
        let out = dl_composite_channel(&nlos, &ap, &us, &PhaseShiftMatrix::new(th.to_vec())).unwrap();
        let mut expect = h0;
        for m in 0..3 {
            expect += a[m] * c(th[m].cos(), th[m].sin()) * b[m];
        }
        assert!((out.per_subcarrier[0][(0, 0)] - expect).norm() < 1e-12);

        let out = ul_composite_channel(&nlos, &us[..2], &ap[..2], &PhaseShiftMatrix::new(th[..2].to_vec())).unwrap();
        let mut expect = h0;
        for m in 0..2 {
            expect += a[m] * c(th[m].cos(), th[m].sin()) * b[m];
        }
        assert!((out.per_subcarrier[0][(0, 0)] - expect).norm() < 1e-12);
    }

    #[test]
    fn phase_pi_flips_cascade() {
        let s = Scenario::<f64>::default_indoor();
        let set = synthesize_channels(&s, 3).unwrap();
        let m = s.n_elements();
        let zero = set.ul_composite(1, 0, &PhaseShiftMatrix::zeros(m)).unwrap();
        let flipped = set
            .ul_composite(1, 0, &PhaseShiftMatrix::new(vec![std::f64::consts::PI; m]))
            .unwrap();
        let nlos = &set.ul_nlos[1][0];
        for n in 0..set.n_sc {
            let a = &zero.per_subcarrier[n] - &nlos.per_subcarrier[n];
            let b = &flipped.per_subcarrier[n] - &nlos.per_subcarrier[n];
            assert!((a + b).norm() <= 1e-12 * nlos.per_subcarrier[n].norm().max(1e-30));
        }
    }

    #[test]
    fn zero_gain_irs_gives_nlos() {
        let s = Scenario::<f64>::default_indoor();
        let mut set = synthesize_channels(&s, 1).unwrap();
        for row in set.dl_ap_irs.iter_mut() {
            for t in row.iter_mut() {
                for m in t.per_subcarrier.iter_mut() {
                    m.fill(c(0.0, 0.0));
                }
            }
        }
        let phi = PhaseShiftMatrix::new(vec![0.7; s.n_elements()]);
        assert_eq!(
            set.dl_composite(2, 1, &phi).unwrap().per_subcarrier,
            set.dl_nlos[2][1].per_subcarrier
        );
    }

    #[test]
    fn channel_set_is_seed_deterministic_and_finite() {
        let s = Scenario::<f64>::default_indoor();
        let a = synthesize_channels(&s, 7).unwrap();
        let b = synthesize_channels(&s, 7).unwrap();
        assert_eq!(a, b);
        let c = synthesize_channels(&s, 8).unwrap();
        assert_ne!(a.dl_nlos, c.dl_nlos);
        assert_eq!(a.n_elements(), 24);
        // Fading does not depend on the IRS size.
        let small = synthesize_channels(&s.with_irs_elements(6), 7).unwrap();
        assert_eq!(small.dl_nlos, a.dl_nlos);
    }

    #[test]
    fn real_decay_variant_is_flat_in_frequency() {
        let mut doc = ScenarioDocument::default_indoor();
        doc.system.delay_model = crate::scenario::DelayModelKind::RealDecay;
        let s = Scenario::<f64>::from_document(&doc).unwrap();
        let t = dl_irs_user_channel(&s, 0, 0, 0).unwrap();
        assert!(t.per_subcarrier.windows(2).all(|w| w[0] == w[1]));
    }

    proptest! {
        #[test]
        fn composite_is_linear_in_single_element(scale in 0.1f64..3.0, theta in -3.0f64..3.0) {
            let n = NodeId::Ap(0);
            let u = NodeId::User(0);
            let nlos = scalar_tensor(&[c(0.2, 0.1), c(-0.3, 0.4)], n, u);
            let a = scalar_tensor(&[c(0.5, -0.2), c(0.1, 0.3)], n, NodeId::Irs(0));
            let b = scalar_tensor(&[c(0.4, 0.4), c(-0.2, 0.6)], NodeId::Irs(0), u);
            let mut a2 = a.clone();
            for m in a2.per_subcarrier.iter_mut() {
                *m *= c(scale, 0.0);
            }
            let phi = PhaseShiftMatrix::new(vec![theta]);
            let h1 = dl_composite_channel(&nlos, &[a], std::slice::from_ref(&b), &phi).unwrap();
            let h2 = dl_composite_channel(&nlos, &[a2], &[b], &phi).unwrap();
            for k in 0..2 {
                let t1 = h1.per_subcarrier[k][(0, 0)] - nlos.per_subcarrier[k][(0, 0)];
                let t2 = h2.per_subcarrier[k][(0, 0)] - nlos.per_subcarrier[k][(0, 0)];
                prop_assert!((t2 - t1 * scale).norm() < 1e-12);
            }
        }

        #[test]
        fn path_gain_decreases_with_distance(d in 0.1f64..50.0, dd in 0.01f64..5.0, w in 1.0f64..6.0) {
            let g1 = path_gain_db(d, 60e9, w).unwrap();
            let g2 = path_gain_db(d + dd, 60e9, w).unwrap();
            prop_assert!(g2 < g1);
        }
    }
}
