//! `drs-inekf`: simulate rocking-treadmill walking, run the invariant EKF on a
//! sensor stream, or run the Monte Carlo comparison of filter variants.
//!
//! Exit codes: 0 success, 2 configuration or I/O error, 3 bad input data,
//! 4 a gating check of the Monte Carlo comparison failed.

mod config;
mod manifest;
mod plot;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use drs_inekf::filter::Variant;
use drs_inekf::harness::{
    evaluate_claims, monte_carlo, run_trial, write_aggregate_csv, write_trial_csv, Check, InitErrorRanges,
    McReport, Metric, TrialConfig,
};
use drs_inekf::stream::SensorStream;

use config::RunConfig;
use manifest::{sidecar, RunManifest};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Data(String),
    Acceptance(Vec<String>),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Data(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
            CliError::Acceptance(failed) => write!(f, "failed checks: {}", failed.join("; ")),
        }
    }
}

impl From<drs_inekf::Error> for CliError {
    fn from(e: drs_inekf::Error) -> Self {
        use drs_inekf::Error as E;
        let root = match &e {
            E::Trial { source, .. } => source.as_ref(),
            other => other,
        };
        match root {
            E::Config { .. } => CliError::Config(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "drs-inekf", version, about = "Invariant EKF for walking on dynamic rigid surfaces")]
struct Cli {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a walk and write its sensor stream as JSON Lines.
    Sim {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one filter variant over a stream and write per-sample error metrics.
    Estimate {
        /// Sensor stream (JSON Lines) with embedded truth.
        stream: PathBuf,
        #[arg(long, default_value = "proposed", value_parser = parse_variant)]
        variant: Variant,
        /// Start from the first truth sample perturbed by an initial error
        /// drawn from `trials.init_error` with this seed; without it the
        /// filter starts at the truth.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare filter variants over many trials; writes CSVs, SVG plots and a
    /// pass/fail summary.
    Montecarlo {
        /// Overrides `trials.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: drs_inekf::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.print_config {
        // A closed pipe (`| head`) is not an error.
        let _ = writeln!(std::io::stdout().lock(), "{}", cfg.to_json());
        return Ok(());
    }
    match cli.command {
        None => Err(CliError::Config("no subcommand given (try --help)".into())),
        Some(Command::Sim { seed, out }) => cmd_sim(&cfg, seed, &out),
        Some(Command::Estimate { stream, variant, seed, out }) => cmd_estimate(&cfg, &stream, variant, seed, &out),
        Some(Command::Montecarlo { seed, out, jobs }) => cmd_montecarlo(cfg, seed, &out, jobs),
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => ensure_dir(dir),
        _ => Ok(()),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn cmd_sim(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let stream = cfg.scenario().stream(seed)?;
    ensure_parent(out)?;
    let mut manifest = RunManifest::new("sim", cfg, seed);
    manifest.emit(out, stream.to_jsonl_string().as_bytes())?;
    manifest.finish(&sidecar(out), start.elapsed())?;
    println!("wrote {} records to {}", stream.records.len(), out.display());
    Ok(())
}

fn cmd_estimate(
    cfg: &RunConfig,
    stream_path: &Path,
    variant: Variant,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let start = Instant::now();
    let file = File::open(stream_path).map_err(|e| CliError::Io(format!("{}: {e}", stream_path.display())))?;
    let stream = SensorStream::read_jsonl(BufReader::new(file)).map_err(|e| match e {
        drs_inekf::Error::Io(io) => CliError::Io(format!("{}: {io}", stream_path.display())),
        other => CliError::Data(format!("{}: {other}", stream_path.display())),
    })?;
    let tcfg = TrialConfig {
        n_trials: 1,
        init_error: if seed.is_some() { cfg.trials.init_error.clone() } else { InitErrorRanges::zero() },
        init_cov: Some(cfg.trials.initial_covariance()),
        variants: vec![variant],
        ..cfg.trials.clone()
    };
    let fcfg = cfg.filter.clone().with_variant(variant);
    let result = run_trial(&stream, &tcfg, &[fcfg], 0, seed.unwrap_or(0))?;
    let mut csv = Vec::new();
    write_trial_csv(&result, &mut csv)?;
    ensure_parent(out)?;
    let mut manifest = RunManifest::new("estimate", cfg, seed.unwrap_or(0));
    manifest.emit(out, &csv)?;
    manifest.finish(&sidecar(out), start.elapsed())?;
    let rows = result.rows.get(&variant).map_or(0, |r| r.len());
    println!("wrote {rows} metric rows ({}) to {}", variant.name(), out.display());
    Ok(())
}

const COLORS: [(Variant, &str); 2] = [(Variant::Proposed, "#1f77b4"), (Variant::PositionOnly, "#ff7f0e")];

fn emit_report(manifest: &mut RunManifest, dir: &Path, tag: &str, report: &McReport) -> Result<(), CliError> {
    let mut agg = Vec::new();
    write_aggregate_csv(&report.aggregate, &mut agg)?;
    manifest.emit(&dir.join(format!("{tag}_aggregate.csv")), &agg)?;

    let trial_dir = dir.join("trials").join(tag);
    ensure_dir(&trial_dir)?;
    for tr in &report.trials {
        let mut csv = Vec::new();
        write_trial_csv(tr, &mut csv)?;
        manifest.emit(&trial_dir.join(format!("trial_{:03}.csv", tr.trial)), &csv)?;
    }

    let plot_dir = dir.join("plots");
    ensure_dir(&plot_dir)?;
    for metric in Metric::ALL {
        let series: Vec<plot::Series> = COLORS
            .iter()
            .filter_map(|&(v, color)| {
                let bands = report.aggregate.series.get(&(v, metric))?;
                Some(plot::Series { label: v.name(), color, bands })
            })
            .collect();
        let unit = metric.unit();
        let y_label = if unit.is_empty() { metric.name().to_string() } else { format!("{} ({unit})", metric.name()) };
        let svg = plot::band_plot(&format!("{tag}: {}", metric.name()), &y_label, &series);
        manifest.emit(&plot_dir.join(format!("{tag}_{}.svg", metric.name())), svg.as_bytes())?;
    }
    Ok(())
}

fn print_summary(checks: &[Check]) {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    println!("{:<6} {:<width$}  detail", "status", "check");
    for c in checks {
        let status = match (c.gating, c.passed) {
            (false, _) => "INFO",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        println!("{status:<6} {:<width$}  {}", c.name, c.detail);
    }
}

fn cmd_montecarlo(mut cfg: RunConfig, seed: Option<u64>, out: &Path, jobs: Option<usize>) -> Result<(), CliError> {
    let start = Instant::now();
    if let Some(s) = seed {
        cfg.trials.master_seed = s;
    }
    if jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    ensure_dir(out)?;
    let rocking = monte_carlo(&cfg.trials, &cfg.scenario(), jobs)?;
    let control = monte_carlo(&cfg.trials, &cfg.control_scenario(), jobs)?;

    let mut manifest = RunManifest::new("montecarlo", &cfg, cfg.trials.master_seed);
    emit_report(&mut manifest, out, "rocking", &rocking)?;
    emit_report(&mut manifest, out, "control", &control)?;
    manifest.finish(&out.join("manifest.json"), start.elapsed())?;

    let checks = evaluate_claims(&rocking, &control);
    print_summary(&checks);
    let failed: Vec<String> = checks.iter().filter(|c| c.gating && !c.passed).map(|c| c.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(failed))
    }
}
