//! Command-line driver for the link simulator
//!
//! Every subcommand starts from a scenario (JSON file via `--config`,
//! defaults otherwise), applies the command-line overrides, and writes CSV
//! to `--out` or stdout. Results are deterministic in the seed and scenario:
//! the worker count changes wall time only, never a single byte of the data
//! rows. Logs go to stderr (`RUST_LOG=debug` for per-sweep detail).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fftn_otfs::channel::DelayQuant;
use fftn_otfs::error::{Error, Result};
use fftn_otfs::scenario::{AlphaPolicy, Scenario, SweepGrid, FAST_TRIALS};
use fftn_otfs::sweep;

/// Link-level simulator for compressed-signaling delay-Doppler transmission
/// over satellite channels.
#[derive(Debug, Parser)]
#[command(name = "fftn-otfs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bit-error-rate sweep under one signaling policy.
    BerSweep(SweepArgs),
    /// Fixed-factor baselines plus the adaptive policy, with its factor trace.
    ThroughputSweep(SweepArgs),
    /// Adaptive-policy sweeps under each SNR-estimation error level.
    RobustnessSweep(SweepArgs),
    /// Slot-by-slot satellite pass simulation.
    PassSim(PassArgs),
    /// Per-elevation loss and SNR table.
    Linkbudget(LinkbudgetArgs),
    /// Small-instance oracle self-checks.
    Validate(ValidateArgs),
    /// Regenerate the adaptive mode table for a channel and error target.
    CalibrateLut(CalibrateArgs),
}

/// Options shared by every scenario-driven subcommand.
#[derive(Debug, Args)]
struct CommonOpts {
    /// Scenario JSON; omitted fields take their defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Channel model: tdl-a .. tdl-e, or los.
    #[arg(long, value_name = "NAME")]
    model: Option<String>,
    /// Signaling policy: a fixed factor in (0,1], or lut:default /
    /// lut:footnote-modes.
    #[arg(long, value_name = "POLICY")]
    alpha: Option<String>,
    /// Sweep grid start:stop:step — SNR in dB, or elevation in degrees when
    /// the scenario runs in link-budget mode.
    #[arg(long, value_name = "GRID")]
    snr: Option<String>,
    /// Monte-Carlo trials per point.
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    /// Master seed.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Quick look: 500 trials per point unless --trials says otherwise.
    #[arg(long)]
    fast: bool,
    /// Pin the strictest reproduction conventions (floor delay quantization).
    #[arg(long)]
    strict_paper: bool,
}

impl CommonOpts {
    fn scenario(&self) -> Result<Scenario> {
        let mut s = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("read {}: {e}", path.display()))
                })?;
                Scenario::from_json(&text)?
            }
            None => Scenario::default(),
        };
        if let Some(model) = &self.model {
            s.model = model.clone();
        }
        if let Some(alpha) = &self.alpha {
            s.alpha_policy = AlphaPolicy::parse(alpha)?;
        }
        if let Some(snr) = &self.snr {
            s.snr = SweepGrid::parse(snr)?;
        }
        if self.fast {
            s.trials = FAST_TRIALS;
        }
        if let Some(trials) = self.trials {
            s.trials = trials;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(workers) = self.workers {
            s.workers = workers;
        }
        if self.strict_paper {
            s.quant = DelayQuant::Floor;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Output CSV file (ber-sweep, stdout if omitted) or prefix for the
    /// per-policy files (throughput-sweep, robustness-sweep).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PassArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Output CSV file; stdout if omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LinkbudgetArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Elevation grid start:stop:step in degrees.
    #[arg(long, value_name = "GRID", default_value = "5:90:5")]
    theta: String,
    /// Output CSV file; stdout if omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Negative control: rebuild the matched filter with the compression
    /// forgotten. Exits 0 only if the self-check catches the corruption.
    #[arg(long)]
    corrupt_ambiguity: bool,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Candidate factors, strictly decreasing from 1.0.
    #[arg(long, value_name = "LIST", default_value = "1.0,0.95,0.9,0.85,0.8",
          value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Error-probability target each mode must meet at its threshold.
    #[arg(long, value_name = "P", default_value_t = 1e-3)]
    p_th: f64,
    /// Output JSON file for the table; stdout if omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| Error::Config(format!("write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Derives `<prefix>-<label>.csv` next to the given prefix path.
fn labeled_path(prefix: &Path, label: &str) -> PathBuf {
    let stem = prefix
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_owned());
    prefix.with_file_name(format!("{stem}-{label}.csv"))
}

fn run_ber_sweep(args: &SweepArgs) -> Result<()> {
    let s = args.common.scenario()?;
    let result = sweep::ber_sweep(&s)?;
    log::info!("{}: {} points", result.label, result.rows.len());
    emit(args.out.as_deref(), &sweep::sweep_csv(&s, &result))
}

fn run_throughput_sweep(args: &SweepArgs) -> Result<()> {
    let s = args.common.scenario()?;
    let (results, trace) = sweep::throughput_sweep(&s)?;
    let prefix = args.out.clone().unwrap_or_else(|| PathBuf::from("throughput"));
    let mut trace_label = String::new();
    for result in &results {
        log::info!("{}: {} points", result.label, result.rows.len());
        let path = labeled_path(&prefix, &result.label);
        emit(Some(&path), &sweep::sweep_csv(&s, result))?;
        println!("{}", path.display());
        trace_label = result.label.clone();
    }
    let trace_path = labeled_path(&prefix, "alpha-trace");
    emit(Some(&trace_path), &sweep::alpha_trace_csv(&s, &trace_label, &trace))?;
    println!("{}", trace_path.display());
    Ok(())
}

fn run_robustness_sweep(args: &SweepArgs) -> Result<()> {
    let s = args.common.scenario()?;
    let results = sweep::robustness_sweep(&s)?;
    let prefix = args.out.clone().unwrap_or_else(|| PathBuf::from("robustness"));
    for result in &results {
        log::info!("{}: {} points", result.label, result.rows.len());
        let path = labeled_path(&prefix, &result.label);
        emit(Some(&path), &sweep::sweep_csv(&s, result))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run_pass_sim(args: &PassArgs) -> Result<()> {
    let s = args.common.scenario()?;
    let trace = sweep::pass_sim(&s)?;
    let failed = trace.iter().filter(|r| r.error.is_some()).count();
    log::info!("pass: {} slots, {} failed", trace.len(), failed);
    for record in trace.iter().filter(|r| r.error.is_some()) {
        log::warn!(
            "slot {} at {:.1} deg failed: {}",
            record.slot,
            record.theta_deg,
            record.error.as_deref().unwrap_or("unknown")
        );
    }
    emit(args.out.as_deref(), &sweep::pass_csv(&s, &trace))
}

fn run_linkbudget(args: &LinkbudgetArgs) -> Result<()> {
    let s = args.common.scenario()?;
    let grid = SweepGrid::parse(&args.theta)?;
    emit(args.out.as_deref(), &sweep::linkbudget_csv(&s, &grid)?)
}

fn run_validate(args: &ValidateArgs) -> Result<bool> {
    let report = sweep::validate(args.corrupt_ambiguity)?;
    print!("{report}");
    if args.corrupt_ambiguity {
        let caught = report
            .checks
            .iter()
            .any(|c| c.name == "waveform-vs-matrix" && !c.passed);
        println!(
            "negative control: corruption {}",
            if caught { "caught" } else { "MISSED" }
        );
        Ok(caught)
    } else {
        Ok(report.passed())
    }
}

fn run_calibrate(args: &CalibrateArgs) -> Result<()> {
    let s = args.common.scenario()?;
    let lut = sweep::calibrate(&s, &args.alphas, args.p_th)?;
    for mode in lut.modes() {
        log::info!("mode alpha={} from {} dB", mode.alpha, mode.threshold_db);
    }
    let json = serde_json::to_string_pretty(&lut)
        .map_err(|e| Error::Config(format!("serialize table: {e}")))?;
    emit(args.out.as_deref(), &format!("{json}\n"))
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::BerSweep(args) => run_ber_sweep(args).map(|()| true),
        Command::ThroughputSweep(args) => run_throughput_sweep(args).map(|()| true),
        Command::RobustnessSweep(args) => run_robustness_sweep(args).map(|()| true),
        Command::PassSim(args) => run_pass_sim(args).map(|()| true),
        Command::Linkbudget(args) => run_linkbudget(args).map(|()| true),
        Command::Validate(args) => run_validate(args),
        Command::CalibrateLut(args) => run_calibrate(args).map(|()| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
