use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use irsvr::beamforming::build_analog_codebook;
use irsvr::experiment::{run_experiment, ExperimentSpec, Mode};
use irsvr::io::codebook_io::{codebook_csv_string, write_codebook_csv};
use irsvr::io::snr_csv::{export_snr_csv, external_sinr, import_ns3_snr_csv};
use irsvr::io::{export_results, ExportOptions};
use irsvr::optimizer::complexity::{complexity_probe, loglog_slope, ComplexityOptions};
use irsvr::scenario::{load_scenario_file, CodebookScenario};
use irsvr::{Scenario, ScenarioDocument};

/// IRS-aided indoor mmWave MU-MIMO-OFDM simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario TOML; the built-in default when omitted.
    #[arg(long, short)]
    scenario: Option<PathBuf>,
}

impl ScenarioArg {
    fn load(&self) -> Result<(ScenarioDocument, Scenario<f64>)> {
        match &self.scenario {
            Some(path) => load_scenario_file(path).with_context(|| format!("loading {}", path.display())),
            None => {
                let doc = ScenarioDocument::default_indoor();
                let s = Scenario::from_document(&doc)?;
                Ok((doc, s))
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a codebook / IRS sweep and export the result tables.
    Run(RunArgs),
    /// Check a scenario file and print a summary.
    Validate(ScenarioArg),
    /// Print the built-in default scenario as TOML.
    DefaultScenario,
    /// Dump an analog codebook as CSV.
    Codebook(CodebookArgs),
    /// Count operations of phase optimization and hybrid beamforming.
    Complexity(ComplexityArgs),
    /// Check an SNR trace against a scenario and optionally re-export it.
    ImportSnr(ImportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Output directory.
    #[arg(long, short, default_value = "results")]
    output: PathBuf,
    /// Overrides `io.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma list of mean_gain, min_gain, no_irs, with_irs, external_snr.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    /// Comma list of `<antennas>x<rf>` codebooks, e.g. `8x2,4x1`.
    #[arg(long, value_delimiter = ',')]
    codebooks: Vec<String>,
    /// Comma list of IRS elements per panel for with_irs runs.
    #[arg(long, value_delimiter = ',')]
    irs_sizes: Vec<usize>,
    /// SNR trace for external_snr runs.
    #[arg(long)]
    snr_csv: Option<PathBuf>,
    /// RCG tolerance on the gradient norm relative to its starting value.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Alternating-optimization round limit.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// RCG iteration limit per round.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Record wall time in the convergence table.
    #[arg(long)]
    timings: bool,
    /// Also write per-subcarrier utility rows.
    #[arg(long)]
    utility_report: bool,
    /// Also write link path parameters as JSON.
    #[arg(long)]
    channel_params: bool,
}

#[derive(Args)]
struct CodebookArgs {
    #[arg(long)]
    antennas: usize,
    #[arg(long, default_value_t = 1)]
    rf: usize,
    /// Beam grid size; twice the antenna count when omitted.
    #[arg(long)]
    grid: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    sizes: Vec<usize>,
    /// RCG iterations per size.
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Include wall time columns.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct ImportArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Trace with columns node_id,peer_id,snr_db.
    input: PathBuf,
    /// Re-export the parsed trace here.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(&args),
        Command::DefaultScenario => {
            print!("{}", ScenarioDocument::default_indoor().to_toml());
            Ok(())
        }
        Command::Codebook(args) => codebook(&args),
        Command::Complexity(args) => complexity(&args),
        Command::ImportSnr(args) => import_snr(&args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let (doc, mut scenario) = args.scenario.load()?;
    if let Some(e) = args.epsilon {
        scenario.optimizer.epsilon = e;
    }
    if let Some(r) = args.max_rounds {
        scenario.optimizer.max_rounds = r;
    }
    if let Some(k) = args.max_iter {
        scenario.optimizer.max_iter = k;
    }
    if let Some(seed) = args.seed {
        scenario.io.seed = seed;
    }
    let snr_path = args.snr_csv.clone().or_else(|| scenario.io.snr_csv.clone());
    let mut spec = ExperimentSpec::new(scenario, &args.output);
    spec.scenario_path = args.scenario.scenario.clone();
    spec.document = Some(doc);
    if !args.modes.is_empty() {
        spec.modes = args
            .modes
            .iter()
            .map(|m| m.trim().parse())
            .collect::<Result<BTreeSet<Mode>, _>>()?;
    }
    if !args.codebooks.is_empty() {
        spec.codebooks = args
            .codebooks
            .iter()
            .map(|c| CodebookScenario::parse(c))
            .collect::<Result<_, _>>()?;
    }
    if !args.irs_sizes.is_empty() {
        spec.irs_sizes = args.irs_sizes.clone();
    }
    if spec.modes.contains(&Mode::ExternalSnr) {
        let Some(path) = snr_path else {
            bail!("external_snr needs --snr-csv or io.snr_csv in the scenario");
        };
        spec.external = Some(import_ns3_snr_csv(&path)?);
    }
    let bundle = run_experiment(&spec)?;
    let opts = ExportOptions {
        timings: args.timings,
        utility_report: args.utility_report,
        channel_params: args.channel_params,
    };
    let written = export_results(&bundle, &args.output, &opts)?;
    for run in &bundle.runs {
        println!(
            "{:<32} served {} feasible {} sum utility {:.6e}",
            run.config.label(),
            run.served_users(),
            run.feasible_users(),
            run.report.sum_utility()
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn validate(args: &ScenarioArg) -> Result<()> {
    let (_, s) = args.load()?;
    println!(
        "ok: {} APs, {} users, {} IRS elements in {} panel(s), {} subcarriers, {} codebook scenarios",
        s.n_aps(),
        s.n_users(),
        s.n_elements(),
        s.irs_panels.len(),
        s.params.n_sc,
        s.codebooks.scenarios.len()
    );
    Ok(())
}

fn codebook(args: &CodebookArgs) -> Result<()> {
    let grid = args.grid.unwrap_or(2 * args.antennas).max(args.rf);
    let book = build_analog_codebook::<f64>(args.antennas, args.rf, grid)?;
    match &args.output {
        Some(path) => write_codebook_csv(&book, path)?,
        None => print!("{}", codebook_csv_string(&book)),
    }
    Ok(())
}

fn complexity(args: &ComplexityArgs) -> Result<()> {
    let (_, s) = args.scenario.load()?;
    let opts = ComplexityOptions {
        iterations: args.iterations,
        ..ComplexityOptions::default()
    };
    let rows = complexity_probe(&s, &args.sizes, &opts)?;
    if args.timings {
        println!("m,phase_ops,evaluations,nominal_phase_ops,hybrid_ops,rcg_iterations,phase_seconds,hybrid_seconds");
    } else {
        println!("m,phase_ops,evaluations,nominal_phase_ops,hybrid_ops,rcg_iterations");
    }
    for r in &rows {
        if args.timings {
            println!(
                "{},{},{},{},{},{},{},{}",
                r.m,
                r.phase_ops,
                r.evaluations,
                r.nominal_phase_ops(),
                r.hybrid_ops,
                r.rcg_iterations,
                r.phase_seconds,
                r.hybrid_seconds
            );
        } else {
            println!(
                "{},{},{},{},{},{}",
                r.m,
                r.phase_ops,
                r.evaluations,
                r.nominal_phase_ops(),
                r.hybrid_ops,
                r.rcg_iterations
            );
        }
    }
    if rows.len() >= 2 {
        let m: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
        let phase: Vec<f64> = rows.iter().map(|r| r.nominal_phase_ops()).collect();
        let hybrid: Vec<f64> = rows.iter().map(|r| r.hybrid_ops as f64).collect();
        eprintln!(
            "log-log slope: nominal phase {:.3}, hybrid {:.3}",
            loglog_slope(&m, &phase)?,
            loglog_slope(&m, &hybrid)?
        );
    }
    Ok(())
}

fn import_snr(args: &ImportArgs) -> Result<()> {
    let (_, s) = args.scenario.load()?;
    let trace = import_ns3_snr_csv(&args.input)?;
    let snr = external_sinr::<f64>(&trace, s.n_aps(), s.n_users())?;
    println!(
        "ok: {} rows, {} DL links, {} UL links",
        trace.rows.len(),
        snr.dl.len(),
        snr.ul.len()
    );
    if let Some(out) = &args.output {
        write_trace(&trace, out)?;
    }
    Ok(())
}

fn write_trace(trace: &irsvr::io::ExternalSnrTrace, path: &Path) -> Result<()> {
    export_snr_csv(trace, path)?;
    println!("wrote {}", path.display());
    Ok(())
}
