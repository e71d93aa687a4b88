//! Plot-ready result tables and the run manifest.
//!
//! Data files, one row per run unless noted:
//!
//! | file | columns |
//! |------|---------|
//! | `utility.csv` | run, label, codebook, n_t, n_rf, irs_elements, mode, served_users, feasible_users, sum_rate_dl, sum_utility |
//! | `utility_vs_irs.csv` | run, codebook, mode, irs_elements, sum_utility, mean_utility |
//! | `min_delay.csv` | run, codebook, irs_elements, mode, user, ap, min_transmission_delay |
//! | `convergence.csv` | one row per optimization round: run, codebook, irs_elements, mode, round, objective, grad_norm, rcg_iterations, beams_redesigned, and `seconds` when timings are on |
//!
//! `manifest.json` is written last and marks a complete export. Floats use
//! the shortest representation that parses back to the same value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::channel::{path_gain_db, propagation_delay, reference_loss_db};
use crate::error::{Error, Result};
use crate::experiment::{ResultBundle, RunResult};
use crate::metrics::rate;
use crate::scalar::{to_f64, Real};
use crate::scenario::Scenario;

pub const SCHEMA_VERSION: u32 = 1;

pub const UTILITY_FILE: &str = "utility.csv";
pub const UTILITY_VS_IRS_FILE: &str = "utility_vs_irs.csv";
pub const MIN_DELAY_FILE: &str = "min_delay.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const REPORT_FILE: &str = "utility_report.csv";
pub const CHANNEL_PARAMS_FILE: &str = "channel_params.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportOptions {
    /// Adds wall-clock seconds to the convergence table. Off by default
    /// because it breaks byte-identical reruns.
    pub timings: bool,
    /// Per-subcarrier utility rows of every run.
    pub utility_report: bool,
    /// Link geometry and path parameters as JSON.
    pub channel_params: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Manifest {
    schema_version: u32,
    generator: String,
    version: String,
    seed: u64,
    scenario_path: Option<String>,
    codebooks: Vec<String>,
    irs_sizes: Vec<usize>,
    modes: Vec<String>,
    runs: Vec<String>,
    files: Vec<FileEntry>,
    scenario: Option<String>,
}

/// Shortest round-trip text; scientific outside `[1e-4, 1e15)`.
fn num<T: Real>(v: T) -> String {
    let x = to_f64(v);
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn write(&self, path: &Path) -> Result<FileEntry> {
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(FileEntry {
            name: path.file_name().expect("file path").to_string_lossy().into_owned(),
            rows: self.rows.len(),
        })
    }
}

fn sum_rate<T: Real>(run: &RunResult<T>, bandwidth: T) -> Result<T> {
    let mut total = T::zero();
    for (i, j) in run.association.serving.iter().enumerate() {
        if let Some(j) = j {
            if let Some(s) = run.sinr_dl.get(&(i, *j)) {
                total += rate(s.sinr(), bandwidth)?;
            }
        }
    }
    Ok(total)
}

fn tables<T: Real>(bundle: &ResultBundle<T>, opts: &ExportOptions) -> Result<Vec<(&'static str, Table)>> {
    let bandwidth = bundle.spec.scenario.params.bandwidth;
    let mut utility = Table::new(&[
        "run",
        "label",
        "codebook",
        "n_t",
        "n_rf",
        "irs_elements",
        "mode",
        "served_users",
        "feasible_users",
        "sum_rate_dl",
        "sum_utility",
    ]);
    let mut vs_irs = Table::new(&["run", "codebook", "mode", "irs_elements", "sum_utility", "mean_utility"]);
    let mut delay = Table::new(&[
        "run",
        "codebook",
        "irs_elements",
        "mode",
        "user",
        "ap",
        "min_transmission_delay",
    ]);
    let mut conv_header = vec![
        "run",
        "codebook",
        "irs_elements",
        "mode",
        "round",
        "objective",
        "grad_norm",
        "rcg_iterations",
        "beams_redesigned",
    ];
    if opts.timings {
        conv_header.push("seconds");
    }
    let mut convergence = Table::new(&conv_header);
    let mut report = Table::new(&[
        "run",
        "user",
        "ap",
        "subcarrier",
        "rate_dl",
        "rate_ul",
        "transmission_delay",
        "processing_delay",
        "queuing_delay",
        "total_delay",
        "conditional_utility",
        "routing_utility",
        "total_utility",
        "feasible",
    ]);

    for run in &bundle.runs {
        let c = &run.config;
        let id = c.index.to_string();
        let mode = c.method.as_str().to_string();
        let sum = run.report.sum_utility();
        let rows = run.report.rows.len().max(1);
        utility.rows.push(vec![
            id.clone(),
            c.label(),
            c.codebook.name.clone(),
            c.codebook.n_t.to_string(),
            c.codebook.n_rf.to_string(),
            c.irs_elements.to_string(),
            mode.clone(),
            run.served_users().to_string(),
            run.feasible_users().to_string(),
            num(sum_rate(run, bandwidth)?),
            num(sum),
        ]);
        vs_irs.rows.push(vec![
            id.clone(),
            c.codebook.name.clone(),
            mode.clone(),
            c.irs_elements.to_string(),
            num(sum),
            num(sum / crate::scalar::count::<T>(rows)),
        ]);
        let (ap, d) = match run.min_transmission_delay() {
            Some((ap, d)) => (ap.to_string(), num(d)),
            None => (String::new(), String::new()),
        };
        delay.rows.push(vec![
            id.clone(),
            c.codebook.name.clone(),
            c.irs_elements.to_string(),
            mode.clone(),
            "0".into(),
            ap,
            d,
        ]);
        if let Some(trace) = &run.trace {
            for r in &trace.rounds {
                let mut row = vec![
                    id.clone(),
                    c.codebook.name.clone(),
                    c.irs_elements.to_string(),
                    mode.clone(),
                    r.round.to_string(),
                    num(r.objective),
                    num(r.grad_norm),
                    r.rcg_iterations.to_string(),
                    r.beams_redesigned.to_string(),
                ];
                if opts.timings {
                    row.push(format!("{}", r.seconds));
                }
                convergence.rows.push(row);
            }
        }
        if opts.utility_report {
            for r in &run.report.rows {
                report.rows.push(vec![
                    id.clone(),
                    r.user.to_string(),
                    r.ap.to_string(),
                    r.subcarrier.to_string(),
                    num(r.rate_dl),
                    num(r.rate_ul),
                    num(r.delay.transmission),
                    num(r.delay.processing),
                    num(r.delay.queuing),
                    num(r.delay.total),
                    num(r.conditional_utility),
                    num(r.routing_utility),
                    num(r.total_utility),
                    r.feasible.to_string(),
                ]);
            }
        }
    }
    let mut out = vec![
        (UTILITY_FILE, utility),
        (UTILITY_VS_IRS_FILE, vs_irs),
        (MIN_DELAY_FILE, delay),
        (CONVERGENCE_FILE, convergence),
    ];
    if opts.utility_report {
        out.push((REPORT_FILE, report));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PathParams {
    from: String,
    to: String,
    distance_m: f64,
    delay_s: f64,
    path_gain_db: f64,
    departure: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ChannelParams {
    carrier_dl_hz: f64,
    carrier_ul_hz: f64,
    reference_loss_db: f64,
    pathloss_exponent: f64,
    nlos_penalty_db: f64,
    links: Vec<PathParams>,
}

fn path_params<T: Real>(
    from: String,
    to: String,
    a: &nalgebra::Vector3<T>,
    b: &nalgebra::Vector3<T>,
    scenario: &Scenario<T>,
    extra_db: T,
) -> Result<PathParams> {
    let d = b - a;
    let dist = d.norm();
    Ok(PathParams {
        from,
        to,
        distance_m: to_f64(dist),
        delay_s: to_f64(propagation_delay(dist)),
        path_gain_db: to_f64(
            path_gain_db(dist, scenario.params.carrier_dl, scenario.params.pathloss_exponent)? - extra_db,
        ),
        departure: [to_f64(d.x), to_f64(d.y), to_f64(d.z)],
    })
}

/// DL multipath parameters of every direct and IRS hop.
fn channel_params<T: Real>(scenario: &Scenario<T>) -> Result<ChannelParams> {
    let p = &scenario.params;
    let mut links = Vec::new();
    for (j, ap) in scenario.ap_positions.iter().enumerate() {
        for (i, u) in scenario.user_positions.iter().enumerate() {
            links.push(path_params(
                format!("ap{j}"),
                format!("user{i}"),
                ap,
                u,
                scenario,
                p.nlos_penalty_db,
            )?);
        }
    }
    for (m, e) in scenario.irs_elements().iter().enumerate() {
        for (j, ap) in scenario.ap_positions.iter().enumerate() {
            links.push(path_params(
                format!("ap{j}"),
                format!("irs{m}"),
                ap,
                &e.position,
                scenario,
                T::zero(),
            )?);
        }
        for (i, u) in scenario.user_positions.iter().enumerate() {
            links.push(path_params(
                format!("irs{m}"),
                format!("user{i}"),
                &e.position,
                u,
                scenario,
                T::zero(),
            )?);
        }
    }
    Ok(ChannelParams {
        carrier_dl_hz: to_f64(p.carrier_dl),
        carrier_ul_hz: to_f64(p.carrier_ul),
        reference_loss_db: to_f64(reference_loss_db(p.carrier_dl)),
        pathloss_exponent: to_f64(p.pathloss_exponent),
        nlos_penalty_db: to_f64(p.nlos_penalty_db),
        links,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the tables of `bundle` into `dir`, then the manifest. An empty
/// bundle produces the manifest alone. Returns the written paths.
pub fn export_results<T: Real>(bundle: &ResultBundle<T>, dir: &Path, opts: &ExportOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut written = Vec::new();
    if !bundle.runs.is_empty() {
        for (name, table) in tables(bundle, opts)? {
            let path = dir.join(name);
            files.push(table.write(&path)?);
            written.push(path);
        }
        if opts.channel_params {
            let path = dir.join(CHANNEL_PARAMS_FILE);
            let params = channel_params(&bundle.spec.scenario)?;
            write_json(&path, &params)?;
            files.push(FileEntry {
                name: CHANNEL_PARAMS_FILE.into(),
                rows: params.links.len(),
            });
            written.push(path);
        }
    }
    let spec = &bundle.spec;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        generator: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: spec.seed,
        scenario_path: spec.scenario_path.as_ref().map(|p| p.display().to_string()),
        codebooks: spec.codebooks.iter().map(|c| c.name.clone()).collect(),
        irs_sizes: spec.irs_sizes.clone(),
        modes: spec.modes.iter().map(|m| m.to_string()).collect(),
        runs: bundle.runs.iter().map(|r| r.config.label()).collect(),
        files,
        scenario: spec.document.as_ref().map(|d| d.to_toml()),
    };
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    written.push(path);
    Ok(written)
}
