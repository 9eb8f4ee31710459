//! `fda-align` command line: `synth`, `align` and `bench`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config error, 3 I/O error,
//! 4 malformed matches CSV.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{AppConfig, ConfigError};
use crate::dynamic::{run_dynamic, PeriodRecord, RunnerError};
use crate::io::{self, CsvError};
use crate::loss::MatchSet;
use crate::synth::{self, grid_points, reprojection_error_vs_truth, GroundTruth};

/// Environment variable capping the optimizer's worker threads.
pub const THREADS_ENV: &str = "FDA_ALIGN_THREADS";

pub const MATCHES_FILE: &str = "matches.csv";
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const PERIODS_FILE: &str = "periods.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "fda-align", version)]
#[command(about = "Dynamic homography alignment with the fractal decomposition optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario and optimizer seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic matches CSV and its ground truth.
    Synth(Common),
    /// Track the homography over a matches CSV.
    Align {
        /// Input matches CSV (`frame_id,x1,y1,x2,y2`).
        #[arg(long)]
        matches: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate, align and score against ground truth.
    Bench(Common),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Csv { line: u64, reason: String },
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Csv { .. } => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Csv { line, reason } => write!(f, "malformed CSV at line {line}: {reason}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<RunnerError> for CliError {
    fn from(e: RunnerError) -> Self {
        match e {
            RunnerError::ConfigInvalid(_) => CliError::Config(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path, e: CsvError) -> CliError {
    match e {
        CsvError::Malformed { line, reason } => CliError::Csv { line, reason },
        CsvError::Io(e) => io_err(path, e),
    }
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
    }
}

fn load_config(common: &Common, threads: usize) -> Result<AppConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            AppConfig::from_json(&text)?
        }
        None => AppConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.fda.threads = threads;
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_scenario(dir: &Path, stream: &[MatchSet], truth: &GroundTruth) -> Result<(), CliError> {
    let mut csv = Vec::new();
    io::write_matches(&mut csv, stream).map_err(|e| csv_err(dir, e))?;
    write_file(&dir.join(MATCHES_FILE), &csv)?;
    let mut json = serde_json::to_string_pretty(truth).expect("truth serializes");
    json.push('\n');
    write_file(&dir.join(TRUTH_FILE), json.as_bytes())
}

fn align_stream(
    stream: &[MatchSet],
    cfg: &AppConfig,
    dir: &Path,
    quiet: bool,
) -> Result<Vec<PeriodRecord>, CliError> {
    let (trace, periods) = run_dynamic(stream, &cfg.runner_config())?;
    let mut csv = Vec::new();
    io::write_trace(&mut csv, &trace).map_err(|e| csv_err(dir, e))?;
    write_file(&dir.join(TRACE_FILE), &csv)?;
    write_file(&dir.join(PERIODS_FILE), io::periods_json(&periods).as_bytes())?;
    if !quiet {
        for p in &periods {
            println!(
                "period {} (frame {}): best loss {:.6} after {} evaluations",
                p.period_index, p.start_frame, p.best_loss, p.evaluations
            );
        }
    }
    Ok(periods)
}

fn cmd_synth(common: &Common, threads: usize) -> Result<(), CliError> {
    let cfg = load_config(common, threads)?;
    let scenario = synth::generate(&cfg.scenario)
        .map_err(|e| CliError::Config(format!("config field `scenario.{}`: {}", e.field, e.reason)))?;
    prepare_out(&common.out)?;
    write_scenario(&common.out, &scenario.stream, &scenario.truth)?;
    if !common.quiet {
        println!(
            "synth: {} frames, {} keypoints, {} moves -> {}",
            scenario.stream.len(),
            cfg.scenario.n_keypoints,
            scenario.truth.change_frames().len(),
            common.out.display()
        );
    }
    Ok(())
}

fn cmd_align(matches: &Path, common: &Common, threads: usize) -> Result<(), CliError> {
    let cfg = load_config(common, threads)?;
    let file = fs::File::open(matches).map_err(|e| io_err(matches, e))?;
    let stream = io::read_matches(std::io::BufReader::new(file)).map_err(|e| csv_err(matches, e))?;
    prepare_out(&common.out)?;
    align_stream(&stream, &cfg, &common.out, common.quiet)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PeriodScore {
    period_index: usize,
    start_frame: u64,
    reprojection_error: f64,
    best_loss: f64,
    evaluations: usize,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    periods: Vec<PeriodScore>,
    detector_hits: usize,
    true_moves: usize,
    hits_on_true_moves: usize,
    total_evaluations: usize,
}

/// Grid used to score a period's homography against the truth.
pub const BENCH_GRID: usize = 10;

fn cmd_bench(common: &Common, threads: usize) -> Result<(), CliError> {
    let cfg = load_config(common, threads)?;
    let scenario = synth::generate(&cfg.scenario)
        .map_err(|e| CliError::Config(format!("config field `scenario.{}`: {}", e.field, e.reason)))?;
    prepare_out(&common.out)?;
    write_scenario(&common.out, &scenario.stream, &scenario.truth)?;
    let periods = align_stream(&scenario.stream, &cfg, &common.out, common.quiet)?;

    let grid = grid_points(cfg.scenario.image_size, BENCH_GRID);
    let true_moves = scenario.truth.change_frames();
    let scores: Vec<PeriodScore> = periods
        .iter()
        .map(|p| {
            let truth = scenario
                .truth
                .at(p.start_frame)
                .expect("period starts on a generated frame");
            PeriodScore {
                period_index: p.period_index,
                start_frame: p.start_frame,
                reprojection_error: reprojection_error_vs_truth(&p.best_h, &truth.homography, &grid),
                best_loss: p.best_loss,
                evaluations: p.evaluations,
            }
        })
        .collect();
    let report = BenchReport {
        detector_hits: periods.len().saturating_sub(1),
        true_moves: true_moves.len(),
        hits_on_true_moves: periods
            .iter()
            .skip(1)
            .filter(|p| true_moves.contains(&p.start_frame))
            .count(),
        total_evaluations: periods.iter().map(|p| p.evaluations).sum(),
        periods: scores,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&common.out.join(REPORT_FILE), json.as_bytes())?;
    if !common.quiet {
        println!(
            "bench: {} detector hits for {} true moves",
            report.detector_hits, report.true_moves
        );
        for s in &report.periods {
            println!(
                "period {}: reprojection error {:.4} px",
                s.period_index, s.reprojection_error
            );
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = threads_from_env().and_then(|threads| match &cli.command {
        Command::Synth(common) => cmd_synth(common, threads),
        Command::Align { matches, common } => cmd_align(matches, common, threads),
        Command::Bench(common) => cmd_bench(common, threads),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fda-align: {e}");
            e.exit_code()
        }
    }
}
