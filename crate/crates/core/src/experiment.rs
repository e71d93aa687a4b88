//! Codebook and IRS-size sweeps over the full pipeline.
//!
//! A sweep crosses codebook scenarios, IRS configurations and evaluation
//! methods. Each `(codebook, irs)` group runs alternating optimization once;
//! the mean-gain and min-gain runs of that group evaluate the same optimized
//! beams and phases. External-SNR runs skip channel synthesis and feed an
//! imported trace straight into the rate, delay and utility stages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{associate_users, Association};
use crate::error::{Error, Result};
use crate::io::snr_csv::{external_sinr, ExternalSnrTrace};
use crate::metrics::{LinkSinr, UtilityReport};
use crate::optimizer::ao::{alternating_optimize, AoTrace};
use crate::pipeline::{report_from_sinr, Aggregation};
use crate::scalar::Real;
use crate::scenario::{CodebookScenario, Scenario, ScenarioDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MeanGain,
    MinGain,
    NoIrs,
    WithIrs,
    ExternalSnr,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::MeanGain,
        Mode::MinGain,
        Mode::NoIrs,
        Mode::WithIrs,
        Mode::ExternalSnr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::MeanGain => "mean_gain",
            Mode::MinGain => "min_gain",
            Mode::NoIrs => "no_irs",
            Mode::WithIrs => "with_irs",
            Mode::ExternalSnr => "external_snr",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mode `{s}`")))
    }
}

/// How a run turns channels (or a trace) into SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Gain(Aggregation),
    External,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gain(Aggregation::Mean) => "mean_gain",
            Method::Gain(Aggregation::Min) => "min_gain",
            Method::External => "external_snr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec<T: Real> {
    pub scenario: Scenario<T>,
    /// Where the scenario came from, for the manifest.
    pub scenario_path: Option<PathBuf>,
    /// Source document, embedded in the manifest when present.
    pub document: Option<ScenarioDocument>,
    pub codebooks: Vec<CodebookScenario>,
    /// Elements per panel for `with_irs` runs.
    pub irs_sizes: Vec<usize>,
    pub modes: BTreeSet<Mode>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub external: Option<ExternalSnrTrace>,
}

impl<T: Real> ExperimentSpec<T> {
    /// Every codebook of `scenario`, with and without its IRS, mean gain.
    pub fn new(scenario: Scenario<T>, output_dir: impl Into<PathBuf>) -> Self {
        let per_panel = scenario.irs_panels.first().map(|p| p.element_count()).unwrap_or(0);
        Self {
            codebooks: scenario.codebooks.scenarios.clone(),
            irs_sizes: if per_panel > 0 { vec![per_panel] } else { Vec::new() },
            modes: [Mode::MeanGain, Mode::NoIrs, Mode::WithIrs].into_iter().collect(),
            seed: scenario.io.seed,
            scenario_path: None,
            document: None,
            output_dir: output_dir.into(),
            external: None,
            scenario,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::invalid("experiment.modes", "at least one mode is required"));
        }
        if self.codebooks.is_empty() {
            return Err(Error::invalid(
                "experiment.codebooks",
                "at least one codebook scenario is required",
            ));
        }
        if self.modes.contains(&Mode::WithIrs) {
            if self.irs_sizes.is_empty() {
                return Err(Error::invalid(
                    "experiment.irs_sizes",
                    "with_irs needs at least one size",
                ));
            }
            if self.scenario.irs_panels.is_empty() {
                return Err(Error::invalid(
                    "experiment.irs_sizes",
                    "scenario has no IRS panel to resize",
                ));
            }
        }
        if self.modes.contains(&Mode::ExternalSnr) && self.external.is_none() {
            return Err(Error::invalid("experiment.modes", "external_snr needs an SNR trace"));
        }
        for cb in &self.codebooks {
            self.scenario.with_codebook(cb)?;
        }
        Ok(())
    }

    /// IRS element counts per panel, `0` for the no-IRS baseline.
    pub fn irs_configs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if self.modes.contains(&Mode::NoIrs) {
            out.push(0);
        }
        if self.modes.contains(&Mode::WithIrs) || !self.modes.contains(&Mode::NoIrs) {
            out.extend(self.irs_sizes.iter().copied().filter(|m| *m > 0));
        }
        out.dedup();
        out
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut out = Vec::new();
        if self.modes.contains(&Mode::MeanGain) {
            out.push(Method::Gain(Aggregation::Mean));
        }
        if self.modes.contains(&Mode::MinGain) {
            out.push(Method::Gain(Aggregation::Min));
        }
        if self.modes.contains(&Mode::ExternalSnr) {
            out.push(Method::External);
        }
        if out.is_empty() {
            out.push(Method::Gain(Aggregation::Mean));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub index: usize,
    pub codebook: CodebookScenario,
    /// Elements per IRS panel; `0` removes the IRS.
    pub irs_elements: usize,
    pub method: Method,
}

impl RunConfig {
    pub fn label(&self) -> String {
        format!(
            "{}/irs{}/{}",
            self.codebook.name,
            self.irs_elements,
            self.method.as_str()
        )
    }
}

/// Runs in output order: codebook, then IRS configuration, then method.
pub fn plan_runs<T: Real>(spec: &ExperimentSpec<T>) -> Vec<RunConfig> {
    let methods = spec.methods();
    let mut out = Vec::new();
    for cb in &spec.codebooks {
        for m in spec.irs_configs() {
            for method in &methods {
                out.push(RunConfig {
                    index: out.len(),
                    codebook: cb.clone(),
                    irs_elements: m,
                    method: *method,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T: Real> {
    pub config: RunConfig,
    pub association: Association,
    pub sinr_dl: BTreeMap<(usize, usize), LinkSinr<T>>,
    pub report: UtilityReport<T>,
    /// Optimization trace shared by the gain runs of one group.
    pub trace: Option<AoTrace<T>>,
}

impl<T: Real> RunResult<T> {
    /// Smallest per-subcarrier transmission delay of the first user.
    pub fn min_transmission_delay(&self) -> Option<(usize, T)> {
        self.report.min_transmission_delay(0)
    }

    pub fn served_users(&self) -> usize {
        self.association.serving.iter().filter(|s| s.is_some()).count()
    }

    pub fn feasible_users(&self) -> usize {
        self.report.feasible.iter().filter(|f| **f).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle<T: Real> {
    pub spec: ExperimentSpec<T>,
    pub runs: Vec<RunResult<T>>,
}

impl<T: Real> ResultBundle<T> {
    /// A bundle with no runs.
    pub fn empty(spec: ExperimentSpec<T>) -> Self {
        Self { spec, runs: Vec::new() }
    }
}

fn run_context(label: String) -> impl FnOnce(Error) -> Error {
    move |e| Error::Run {
        run: label,
        source: Box::new(e),
    }
}

fn group_runs<T: Real>(spec: &ExperimentSpec<T>, configs: &[RunConfig]) -> Result<Vec<RunResult<T>>> {
    let first = &configs[0];
    let mut scenario = spec
        .scenario
        .with_codebook(&first.codebook)?
        .with_irs_elements(first.irs_elements);
    scenario.io.seed = spec.seed;
    let needs_ao = configs.iter().any(|c| matches!(c.method, Method::Gain(_)));
    let outcome = if needs_ao {
        Some(alternating_optimize(&scenario).map_err(run_context(first.label()))?)
    } else {
        None
    };
    configs
        .iter()
        .map(|config| {
            let label = config.label();
            match (config.method, &outcome) {
                (Method::Gain(agg), Some(out)) => {
                    let eval = out.evaluate(&scenario, agg).map_err(run_context(label))?;
                    Ok(RunResult {
                        config: config.clone(),
                        association: out.association.clone(),
                        sinr_dl: eval
                            .sinr_dl
                            .into_iter()
                            .map(|(k, v)| (k, LinkSinr::Modeled(v)))
                            .collect(),
                        report: eval.report,
                        trace: Some(out.trace.clone()),
                    })
                }
                (Method::External, _) => {
                    let trace = spec.external.as_ref().expect("validated: external trace present");
                    external_run(&scenario, trace, config).map_err(run_context(label))
                }
                (Method::Gain(_), None) => unreachable!("gain runs trigger optimization"),
            }
        })
        .collect()
}

/// External-SNR run: association and report from imported SNR only.
pub fn external_run<T: Real>(
    scenario: &Scenario<T>,
    trace: &ExternalSnrTrace,
    config: &RunConfig,
) -> Result<RunResult<T>> {
    let snr = external_sinr::<T>(trace, scenario.n_aps(), scenario.n_users())?;
    let rates = snr.dl_rates(scenario.params.bandwidth)?;
    let association = associate_users(scenario, &rates)?;
    let mut dl = BTreeMap::new();
    let mut ul = BTreeMap::new();
    for (i, j) in crate::pipeline::reporting_links(&association) {
        dl.insert((i, j), snr.dl(i, j)?);
        ul.insert((i, j), vec![snr.ul(i, j)?; scenario.params.n_sc]);
    }
    let report = report_from_sinr(scenario, &association, &dl, &ul)?;
    Ok(RunResult {
        config: config.clone(),
        association,
        sinr_dl: dl.into_iter().map(|(k, v)| (k, LinkSinr::External(v))).collect(),
        report,
        trace: None,
    })
}

/// Executes every planned run; groups run concurrently, results keep plan
/// order.
pub fn run_experiment<T: Real + Send + Sync>(spec: &ExperimentSpec<T>) -> Result<ResultBundle<T>> {
    spec.validate()?;
    let plan = plan_runs(spec);
    let mut groups: Vec<Vec<RunConfig>> = Vec::new();
    for config in plan {
        match groups.last_mut() {
            Some(g) if g[0].codebook == config.codebook && g[0].irs_elements == config.irs_elements => g.push(config),
            _ => groups.push(vec![config]),
        }
    }
    let results: Vec<Vec<RunResult<T>>> = groups.par_iter().map(|g| group_runs(spec, g)).collect::<Result<_>>()?;
    Ok(ResultBundle {
        spec: spec.clone(),
        runs: results.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ExperimentSpec<f64> {
        let mut s = Scenario::<f64>::default_indoor();
        s.params.n_sc = 2;
        s.optimizer.max_rounds = 1;
        s.optimizer.max_iter = 5;
        ExperimentSpec::new(s, "out")
    }

    #[test]
    fn default_plan_is_twelve_runs() {
        let plan = plan_runs(&spec());
        assert_eq!(plan.len(), 12);
        assert_eq!(plan[0].label(), "2Antenna-1RF/irs0/mean_gain");
        assert_eq!(plan[1].label(), "2Antenna-1RF/irs24/mean_gain");
        assert!(plan.iter().enumerate().all(|(k, c)| c.index == k));
    }

    #[test]
    fn plan_crosses_methods_and_sizes() {
        let mut sp = spec();
        sp.modes = [Mode::MeanGain, Mode::MinGain, Mode::WithIrs].into_iter().collect();
        sp.irs_sizes = vec![6, 12];
        sp.codebooks.truncate(1);
        let labels: Vec<_> = plan_runs(&sp).iter().map(RunConfig::label).collect();
        assert_eq!(
            labels,
            [
                "2Antenna-1RF/irs6/mean_gain",
                "2Antenna-1RF/irs6/min_gain",
                "2Antenna-1RF/irs12/mean_gain",
                "2Antenna-1RF/irs12/min_gain",
            ]
        );
    }

    #[test]
    fn validation() {
        let mut sp = spec();
        sp.modes.clear();
        assert!(sp.validate().is_err());
        let mut sp = spec();
        sp.modes.insert(Mode::ExternalSnr);
        assert!(sp.validate().is_err());
        let mut sp = spec();
        sp.codebooks.clear();
        assert!(sp.validate().is_err());
        assert_eq!("min_gain".parse::<Mode>().unwrap(), Mode::MinGain);
        assert!("fast".parse::<Mode>().is_err());
    }

    #[test]
    fn min_gain_never_beats_mean_gain() {
        let mut sp = spec();
        sp.modes.insert(Mode::MinGain);
        sp.codebooks.truncate(2);
        let bundle = run_experiment(&sp).unwrap();
        assert_eq!(bundle.runs.len(), 8);
        for pair in bundle.runs.chunks(2) {
            assert_eq!(pair[0].config.method, Method::Gain(Aggregation::Mean));
            assert!(pair[1].report.sum_utility() <= pair[0].report.sum_utility() + 1e-12);
            for (k, v) in &pair[0].sinr_dl {
                assert!(pair[1].sinr_dl[k].sinr() <= v.sinr());
            }
        }
    }
}
