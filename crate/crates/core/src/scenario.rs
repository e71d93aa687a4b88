//! Indoor geometry, system parameters and codebook scenarios.
//!
//! A [`Scenario`] is built from a [`ScenarioDocument`] (TOML with the
//! sections `geometry`, `system`, `codebooks`, `optimizer` and `io`). Every
//! field outside `geometry` has a default; unknown keys are rejected.

use std::path::PathBuf;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const BOLTZMANN: f64 = 1.380_649e-23;

/// User antennas feed a single RF chain.
pub const USER_RF_CHAINS: usize = 1;

/// Axis-aligned room box in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<T: Real> {
    pub min: Vector3<T>,
    pub max: Vector3<T>,
}

impl<T: Real> Bounds<T> {
    pub fn contains(&self, p: &Vector3<T>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

/// IRS panel lying in the Y-Z plane.
///
/// Element `(a, b)` sits at `origin + (0, a * spacing, b * spacing)` and has
/// flat index `a + m_y * b` (Y fastest), matching [`crate::array::upa_steering`].
#[derive(Debug, Clone, PartialEq)]
pub struct IrsPanel<T: Real> {
    pub origin: Vector3<T>,
    pub m_y: usize,
    pub m_z: usize,
    pub spacing: T,
}

impl<T: Real> IrsPanel<T> {
    pub fn element_count(&self) -> usize {
        self.m_y * self.m_z
    }

    pub fn element_coords(&self, index: usize) -> (usize, usize) {
        (index % self.m_y, index / self.m_y)
    }

    pub fn element_position(&self, index: usize) -> Vector3<T> {
        let (a, b) = self.element_coords(index);
        self.origin
            + Vector3::new(
                T::zero(),
                crate::scalar::count::<T>(a) * self.spacing,
                crate::scalar::count::<T>(b) * self.spacing,
            )
    }

    /// Same anchor and spacing, `elements` elements in the most square
    /// `m_y x m_z` layout with `m_y >= m_z`. Smaller layouts are subsets of
    /// larger ones whenever the shapes nest (1, 6, 12, 24 do).
    pub fn resized(&self, elements: usize) -> Self {
        let (m_y, m_z) = panel_shape(elements);
        Self {
            m_y,
            m_z,
            ..self.clone()
        }
    }
}

/// Near-square factorisation `m = m_y * m_z` with `m_y >= m_z`.
pub fn panel_shape(m: usize) -> (usize, usize) {
    if m == 0 {
        return (0, 0);
    }
    let mut m_z = 1;
    let mut d = 1;
    while d * d <= m {
        if m.is_multiple_of(d) {
            m_z = d;
        }
        d += 1;
    }
    (m / m_z, m_z)
}

/// One IRS element, flattened across panels.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsElement<T: Real> {
    pub panel: usize,
    pub index: usize,
    pub a: usize,
    pub b: usize,
    pub position: Vector3<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModelKind {
    /// `exp(-j 2 pi f_n tau)` per subcarrier.
    Phasor,
    /// Literal `exp(-t / tau)` real decay.
    RealDecay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayModel<T: Real> {
    Phasor,
    RealDecay { t: T },
}

/// How the AP processing capacity `m_proc` is divided among served users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessingShare {
    /// Denominator `m_proc / |U_j|`.
    EqualShare,
    /// Denominator `m_proc / N_j` with `N_j = p_ap / |U_j|` (power per user).
    PowerPerUser,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<T: Real> {
    pub n_t: usize,
    pub n_r: usize,
    pub n_rf: usize,
    pub n_s: usize,
    pub n_sc: usize,
    pub bandwidth: T,
    pub carrier_dl: T,
    pub carrier_ul: T,
    /// Noise power sigma^2 in watts.
    pub noise_power: T,
    pub p_ap: T,
    pub p_user: T,
    pub pathloss_exponent: T,
    pub nlos_penalty_db: T,
    pub small_scale_fading: bool,
    pub delay_model: DelayModel<T>,
    pub s_i: T,
    pub a_i: T,
    pub lambda_i: T,
    pub mu_j: T,
    pub gamma_d: T,
    pub r_min: T,
    pub v_cap: usize,
    pub m_proc: T,
    pub v_bits: T,
    pub tracking_e0: T,
    pub processing_share: ProcessingShare,
}

impl<T: Real> SystemParams<T> {
    pub fn wavelength_dl(&self) -> T {
        lit::<T>(SPEED_OF_LIGHT) / self.carrier_dl
    }

    pub fn wavelength_ul(&self) -> T {
        lit::<T>(SPEED_OF_LIGHT) / self.carrier_ul
    }
}

/// An (antennas, RF chains) configuration of the AP analog beamformer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookScenario {
    pub name: String,
    pub n_t: usize,
    pub n_rf: usize,
}

impl CodebookScenario {
    pub fn new(n_t: usize, n_rf: usize) -> Self {
        Self {
            name: format!("{n_t}Antenna-{n_rf}RF"),
            n_t,
            n_rf,
        }
    }

    /// The six AP configurations: 2, 4 and 8 antennas with 1 or 2 RF chains.
    pub fn standard_set() -> Vec<Self> {
        [(2, 1), (2, 2), (4, 1), (4, 2), (8, 1), (8, 2)]
            .into_iter()
            .map(|(n, r)| Self::new(n, r))
            .collect()
    }

    /// Parses `"<antennas>x<rf>"`, e.g. `"8x2"`.
    pub fn parse(text: &str) -> Result<Self> {
        let (a, r) = text
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::InvalidArgument(format!("codebook `{text}` is not <n_t>x<n_rf>")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("codebook `{text}` is not <n_t>x<n_rf>")))
        };
        let cb = Self::new(parse(a)?, parse(r)?);
        if cb.n_t == 0 || cb.n_rf == 0 || cb.n_rf > cb.n_t {
            return Err(Error::InvalidArgument(format!(
                "codebook `{text}` needs 1 <= n_rf <= n_t"
            )));
        }
        Ok(cb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSettings {
    pub ap_beam_grid: Option<usize>,
    pub user_beam_grid: Option<usize>,
    pub scenarios: Vec<CodebookScenario>,
}

impl CodebookSettings {
    pub fn ap_grid(&self, n_t: usize, n_rf: usize) -> usize {
        self.ap_beam_grid.unwrap_or(2 * n_t).max(n_rf)
    }

    pub fn user_grid(&self, n_r: usize) -> usize {
        self.user_beam_grid.unwrap_or(2 * n_r).max(USER_RF_CHAINS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInit {
    /// Uniform phases drawn from the scenario seed.
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings<T: Real> {
    pub epsilon: T,
    pub max_iter: usize,
    pub max_rounds: usize,
    pub round_tolerance: T,
    pub initial_step: T,
    pub shrink: T,
    pub armijo: T,
    pub max_backtracks: usize,
    pub init: PhaseInit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoSettings {
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub snr_csv: Option<PathBuf>,
}

/// Validated, immutable simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    pub ap_positions: Vec<Vector3<T>>,
    pub user_positions: Vec<Vector3<T>>,
    pub irs_panels: Vec<IrsPanel<T>>,
    pub bounds: Bounds<T>,
    pub params: SystemParams<T>,
    pub codebooks: CodebookSettings,
    pub optimizer: OptimizerSettings<T>,
    pub io: IoSettings,
}

impl<T: Real> Scenario<T> {
    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_positions.len()
    }

    /// Total IRS elements over all panels.
    pub fn n_elements(&self) -> usize {
        self.irs_panels.iter().map(IrsPanel::element_count).sum()
    }

    /// All IRS elements, panel by panel, Y fastest within a panel.
    pub fn irs_elements(&self) -> Vec<IrsElement<T>> {
        self.irs_panels
            .iter()
            .enumerate()
            .flat_map(|(p, panel)| {
                (0..panel.element_count()).map(move |idx| {
                    let (a, b) = panel.element_coords(idx);
                    IrsElement {
                        panel: p,
                        index: idx,
                        a,
                        b,
                        position: panel.element_position(idx),
                    }
                })
            })
            .collect()
    }

    /// Copy with the AP antenna/RF configuration of `codebook`.
    pub fn with_codebook(&self, codebook: &CodebookScenario) -> Result<Self> {
        if codebook.n_t == 0 || codebook.n_rf == 0 || codebook.n_rf > codebook.n_t {
            return Err(Error::invalid(
                format!("codebooks.{}", codebook.name),
                "need 1 <= n_rf <= n_t",
            ));
        }
        if self.params.n_s > codebook.n_rf {
            return Err(Error::invalid(
                format!("codebooks.{}", codebook.name),
                format!("n_s = {} exceeds n_rf = {}", self.params.n_s, codebook.n_rf),
            ));
        }
        let mut out = self.clone();
        out.params.n_t = codebook.n_t;
        out.params.n_rf = codebook.n_rf;
        Ok(out)
    }

    /// Copy where every panel carries `elements` elements; `0` removes the IRS.
    pub fn with_irs_elements(&self, elements: usize) -> Self {
        let mut out = self.clone();
        if elements == 0 {
            out.irs_panels.clear();
        } else {
            out.irs_panels = self.irs_panels.iter().map(|p| p.resized(elements)).collect();
        }
        out
    }

    pub fn without_irs(&self) -> Self {
        self.with_irs_elements(0)
    }

    /// Builds and validates a scenario from a parsed document.
    pub fn from_document(doc: &ScenarioDocument) -> Result<Self> {
        doc.validate()?;
        let v = |p: [f64; 3]| Vector3::new(lit::<T>(p[0]), lit(p[1]), lit(p[2]));
        let sys = &doc.system;
        let wavelength_dl = SPEED_OF_LIGHT / sys.carrier_dl;
        let irs_panels = doc
            .geometry
            .irs
            .iter()
            .map(|p| IrsPanel {
                origin: v(p.origin),
                m_y: p.m_y,
                m_z: p.m_z,
                spacing: lit(p.spacing.unwrap_or(wavelength_dl / 2.0)),
            })
            .collect();
        let noise = sys
            .noise_power
            .unwrap_or_else(|| BOLTZMANN * sys.temperature_k * sys.bandwidth * 10f64.powf(sys.noise_figure_db / 10.0));
        let params = SystemParams {
            n_t: sys.n_t,
            n_r: sys.n_r,
            n_rf: sys.n_rf,
            n_s: sys.n_s,
            n_sc: sys.n_sc,
            bandwidth: lit(sys.bandwidth),
            carrier_dl: lit(sys.carrier_dl),
            carrier_ul: lit(sys.carrier_ul),
            noise_power: lit(noise),
            p_ap: lit(sys.p_ap),
            p_user: lit(sys.p_user),
            pathloss_exponent: lit(sys.pathloss_exponent),
            nlos_penalty_db: lit(sys.nlos_penalty_db),
            small_scale_fading: sys.small_scale_fading,
            delay_model: match sys.delay_model {
                DelayModelKind::Phasor => DelayModel::Phasor,
                DelayModelKind::RealDecay => DelayModel::RealDecay { t: lit(sys.decay_time) },
            },
            s_i: lit(sys.s_i),
            a_i: lit(sys.a_i),
            lambda_i: lit(sys.lambda_i),
            mu_j: lit(sys.mu_j),
            gamma_d: lit(sys.gamma_d),
            r_min: lit(sys.r_min),
            v_cap: sys.v_cap,
            m_proc: lit(sys.m_proc),
            v_bits: lit(sys.v_bits),
            tracking_e0: lit(sys.tracking_e0),
            processing_share: sys.processing_share,
        };
        let [bx, by, bz] = doc.geometry.bounds;
        let opt = &doc.optimizer;
        Ok(Self {
            ap_positions: doc.geometry.aps.iter().copied().map(v).collect(),
            user_positions: doc.geometry.users.iter().copied().map(v).collect(),
            irs_panels,
            bounds: Bounds {
                min: v([bx[0], by[0], bz[0]]),
                max: v([bx[1], by[1], bz[1]]),
            },
            params,
            codebooks: CodebookSettings {
                ap_beam_grid: doc.codebooks.ap_beam_grid,
                user_beam_grid: doc.codebooks.user_beam_grid,
                scenarios: doc
                    .codebooks
                    .scenarios
                    .clone()
                    .unwrap_or_else(CodebookScenario::standard_set),
            },
            optimizer: OptimizerSettings {
                epsilon: lit(opt.epsilon),
                max_iter: opt.max_iter,
                max_rounds: opt.max_rounds,
                round_tolerance: lit(opt.round_tolerance),
                initial_step: lit(opt.initial_step),
                shrink: lit(opt.shrink),
                armijo: lit(opt.armijo),
                max_backtracks: opt.max_backtracks,
                init: opt.init,
            },
            io: IoSettings {
                output_dir: doc.io.output_dir.clone(),
                seed: doc.io.seed,
                snr_csv: doc.io.snr_csv.clone(),
            },
        })
    }

    /// The built-in default indoor scenario.
    pub fn default_indoor() -> Self {
        Self::from_document(&ScenarioDocument::default_indoor()).expect("built-in scenario is valid")
    }
}

/// Departure direction `rx - tx` and arrival direction `-(rx - tx)`.
pub fn compute_dod_doa<T: Real>(tx: &Vector3<T>, rx: &Vector3<T>) -> Result<(Vector3<T>, Vector3<T>)> {
    let dod = rx - tx;
    if dod.iter().all(|c| *c == T::zero()) {
        return Err(Error::DegenerateGeometry);
    }
    let doa = -dod;
    Ok((dod, doa))
}

/// Parses a TOML scenario document and validates it.
pub fn load_scenario<T: Real>(text: &str) -> Result<Scenario<T>> {
    let doc = ScenarioDocument::parse(text)?;
    Scenario::from_document(&doc)
}

pub fn load_scenario_file<T: Real>(path: &std::path::Path) -> Result<(ScenarioDocument, Scenario<T>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc = ScenarioDocument::parse(&text)?;
    let scenario = Scenario::from_document(&doc)?;
    Ok((doc, scenario))
}

// ---------------------------------------------------------------------------
// Document schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub geometry: GeometryDoc,
    #[serde(default)]
    pub system: SystemDoc,
    #[serde(default)]
    pub codebooks: CodebooksDoc,
    #[serde(default)]
    pub optimizer: OptimizerDoc,
    #[serde(default)]
    pub io: IoDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryDoc {
    /// `[[x_min, x_max], [y_min, y_max], [z_min, z_max]]` in meters.
    pub bounds: [[f64; 2]; 3],
    pub aps: Vec<[f64; 3]>,
    pub users: Vec<[f64; 3]>,
    #[serde(default)]
    pub irs: Vec<IrsDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsDoc {
    pub origin: [f64; 3],
    pub m_y: usize,
    pub m_z: usize,
    /// Element spacing in meters; half the DL wavelength when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemDoc {
    pub n_t: usize,
    pub n_r: usize,
    pub n_rf: usize,
    pub n_s: usize,
    pub n_sc: usize,
    pub bandwidth: f64,
    pub carrier_dl: f64,
    pub carrier_ul: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_power: Option<f64>,
    pub p_ap: f64,
    pub p_user: f64,
    pub pathloss_exponent: f64,
    pub nlos_penalty_db: f64,
    pub small_scale_fading: bool,
    pub delay_model: DelayModelKind,
    pub decay_time: f64,
    pub s_i: f64,
    pub a_i: f64,
    pub lambda_i: f64,
    pub mu_j: f64,
    pub gamma_d: f64,
    pub r_min: f64,
    pub v_cap: usize,
    pub m_proc: f64,
    pub v_bits: f64,
    pub tracking_e0: f64,
    pub processing_share: ProcessingShare,
}

impl Default for SystemDoc {
    fn default() -> Self {
        Self {
            n_t: 8,
            n_r: 1,
            n_rf: 2,
            n_s: 1,
            n_sc: 64,
            bandwidth: 2.16e9,
            carrier_dl: 60e9,
            carrier_ul: 5e9,
            noise_figure_db: 10.0,
            temperature_k: 290.0,
            noise_power: None,
            p_ap: 1.0,
            p_user: 0.1,
            pathloss_exponent: 4.6,
            nlos_penalty_db: 10.0,
            small_scale_fading: true,
            delay_model: DelayModelKind::Phasor,
            decay_time: 1e-9,
            s_i: 512.0 * 24.0,
            a_i: 6.0,
            lambda_i: 2e-9,
            mu_j: 4e-9,
            gamma_d: 0.02,
            r_min: 1e8,
            v_cap: 2,
            m_proc: 1e9,
            v_bits: 5.0,
            tracking_e0: 1.0,
            processing_share: ProcessingShare::EqualShare,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebooksDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_beam_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_beam_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<CodebookScenario>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerDoc {
    pub epsilon: f64,
    pub max_iter: usize,
    pub max_rounds: usize,
    pub round_tolerance: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    pub init: PhaseInit,
}

impl Default for OptimizerDoc {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iter: 200,
            max_rounds: 20,
            round_tolerance: 1e-6,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 40,
            init: PhaseInit::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_csv: Option<PathBuf>,
}

impl Default for IoDoc {
    fn default() -> Self {
        Self {
            output_dir: None,
            seed: 1,
            snr_csv: None,
        }
    }
}

impl ScenarioDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario document serialises")
    }

    /// 10 x 17 x 3 m room, two APs, four users and one 6 x 4 IRS on the
    /// x = 0 wall next to the play area.
    pub fn default_indoor() -> Self {
        Self {
            geometry: GeometryDoc {
                bounds: [[0.0, 10.0], [0.0, 17.0], [0.0, 3.0]],
                aps: vec![[4.0, 5.5, 2.8], [4.0, 11.0, 2.8]],
                users: vec![[0.8, 7.2, 1.5], [0.7, 8.9, 1.3], [1.1, 8.3, 1.7], [1.4, 7.6, 1.2]],
                irs: vec![IrsDoc {
                    origin: [0.0, 8.0, 1.2],
                    m_y: 6,
                    m_z: 4,
                    spacing: None,
                }],
            },
            system: SystemDoc::default(),
            codebooks: CodebooksDoc::default(),
            optimizer: OptimizerDoc::default(),
            io: IoDoc::default(),
        }
    }

    /// Checks every invariant, reporting the offending field path.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for (k, axis) in ["x", "y", "z"].iter().enumerate() {
            let [lo, hi] = g.bounds[k];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(
                    format!("geometry.bounds.{axis}"),
                    "need finite min < max",
                ));
            }
        }
        let inside = |p: &[f64; 3]| (0..3).all(|k| p[k] >= g.bounds[k][0] && p[k] <= g.bounds[k][1]);
        if g.aps.is_empty() {
            return Err(Error::invalid("geometry.aps", "at least one AP is required"));
        }
        if g.users.is_empty() {
            return Err(Error::invalid("geometry.users", "at least one user is required"));
        }
        for (name, pts) in [("aps", &g.aps), ("users", &g.users)] {
            for (i, p) in pts.iter().enumerate() {
                if !inside(p) {
                    return Err(Error::invalid(
                        format!("geometry.{name}[{i}]"),
                        format!("position {p:?} lies outside the room bounds"),
                    ));
                }
            }
        }
        let wavelength_dl = SPEED_OF_LIGHT / self.system.carrier_dl;
        for (i, panel) in g.irs.iter().enumerate() {
            let path = format!("geometry.irs[{i}]");
            if panel.m_y == 0 || panel.m_z == 0 {
                return Err(Error::invalid(path, "m_y and m_z must be >= 1"));
            }
            let spacing = panel.spacing.unwrap_or(wavelength_dl / 2.0);
            if !(spacing > 0.0 && spacing.is_finite()) {
                return Err(Error::invalid(format!("{path}.spacing"), "must be positive"));
            }
            for a in [0, panel.m_y - 1] {
                for b in [0, panel.m_z - 1] {
                    let p = [
                        panel.origin[0],
                        panel.origin[1] + a as f64 * spacing,
                        panel.origin[2] + b as f64 * spacing,
                    ];
                    if !inside(&p) {
                        return Err(Error::invalid(
                            path,
                            format!("element ({a}, {b}) at {p:?} lies outside the room bounds"),
                        ));
                    }
                }
            }
        }

        let s = &self.system;
        for (name, value) in [
            ("n_t", s.n_t),
            ("n_r", s.n_r),
            ("n_rf", s.n_rf),
            ("n_s", s.n_s),
            ("n_sc", s.n_sc),
            ("v_cap", s.v_cap),
        ] {
            if value == 0 {
                return Err(Error::invalid(format!("system.{name}"), "must be >= 1"));
            }
        }
        if s.n_rf > s.n_t {
            return Err(Error::invalid("system.n_rf", "must not exceed n_t"));
        }
        if s.n_s > s.n_rf {
            return Err(Error::invalid("system.n_s", "must not exceed n_rf"));
        }
        if s.n_s > USER_RF_CHAINS {
            return Err(Error::invalid(
                "system.n_s",
                format!("users have {USER_RF_CHAINS} RF chain, so at most {USER_RF_CHAINS} stream"),
            ));
        }
        let positive = [
            ("bandwidth", s.bandwidth),
            ("carrier_dl", s.carrier_dl),
            ("carrier_ul", s.carrier_ul),
            ("temperature_k", s.temperature_k),
            ("p_ap", s.p_ap),
            ("p_user", s.p_user),
            ("pathloss_exponent", s.pathloss_exponent),
            ("s_i", s.s_i),
            ("m_proc", s.m_proc),
            ("decay_time", s.decay_time),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(format!("system.{name}"), "must be positive and finite"));
            }
        }
        if let Some(n) = s.noise_power {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::invalid("system.noise_power", "must be positive and finite"));
            }
        }
        let non_negative = [
            ("noise_figure_db", s.noise_figure_db),
            ("nlos_penalty_db", s.nlos_penalty_db),
            ("a_i", s.a_i),
            ("lambda_i", s.lambda_i),
            ("gamma_d", s.gamma_d),
            ("r_min", s.r_min),
            ("v_bits", s.v_bits),
            ("tracking_e0", s.tracking_e0),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::invalid(
                    format!("system.{name}"),
                    "must be non-negative and finite",
                ));
            }
        }
        if !(s.mu_j > s.lambda_i) || !s.mu_j.is_finite() {
            return Err(Error::QueueUnstable {
                path: "system.mu_j".into(),
                mu: s.mu_j,
                lambda: s.lambda_i,
            });
        }

        if let Some(list) = &self.codebooks.scenarios {
            if list.is_empty() {
                return Err(Error::invalid("codebooks.scenarios", "must not be empty"));
            }
            for (i, cb) in list.iter().enumerate() {
                if cb.n_t == 0 || cb.n_rf == 0 || cb.n_rf > cb.n_t || s.n_s > cb.n_rf {
                    return Err(Error::invalid(
                        format!("codebooks.scenarios[{i}]"),
                        "need n_s <= n_rf <= n_t and n_rf >= 1",
                    ));
                }
            }
        }
        for (name, grid) in [
            ("ap_beam_grid", self.codebooks.ap_beam_grid),
            ("user_beam_grid", self.codebooks.user_beam_grid),
        ] {
            if grid == Some(0) {
                return Err(Error::invalid(format!("codebooks.{name}"), "must be >= 1"));
            }
        }

        let o = &self.optimizer;
        if !(o.epsilon > 0.0) {
            return Err(Error::invalid("optimizer.epsilon", "must be positive"));
        }
        if o.max_iter == 0 {
            return Err(Error::invalid("optimizer.max_iter", "must be >= 1"));
        }
        if !(o.initial_step > 0.0) {
            return Err(Error::invalid("optimizer.initial_step", "must be positive"));
        }
        if !(o.shrink > 0.0 && o.shrink < 1.0) {
            return Err(Error::invalid("optimizer.shrink", "must lie in (0, 1)"));
        }
        if !(o.armijo > 0.0 && o.armijo < 1.0) {
            return Err(Error::invalid("optimizer.armijo", "must lie in (0, 1)"));
        }
        if !(o.round_tolerance >= 0.0) {
            return Err(Error::invalid("optimizer.round_tolerance", "must be non-negative"));
        }
        Ok(())
    }
}
