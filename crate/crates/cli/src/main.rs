//! `speccurve` — batch front door for the spectral curve toolkit.
//!
//! Exit codes are stable: 0 success, 2 configuration error, 3 input error
//! (including an empty input set), 4 partial failure (some files failed,
//! the run continued).

mod cmd_batch;
mod cmd_qa;
mod cmd_single;
mod config;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_PARTIAL: u8 = 4;

/// Command failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_CONFIG, error: error.into() }
    }
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_INPUT, error: error.into() }
    }
    pub fn partial(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_PARTIAL, error: error.into() }
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "speccurve", version, about = "Spectral curve sampling, reconstruction, and evaluation")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for batch commands (default: logical CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Force sequential execution (bit-identical to parallel runs).
    #[arg(long, global = true)]
    sequential: bool,

    /// Master seed for generation commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SmoothArgs {
    /// Input curve (JSON schema or two-column CSV).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args, Clone)]
struct SampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Sampled curve JSON.
    #[arg(long = "out")]
    output: PathBuf,
    /// Stats record {n_in, n_out, reduction_ratio, epsilon_used}.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long = "baseline-frac")]
    baseline_frac: Option<f64>,
    /// Fixed RDP threshold in unit-square units.
    #[arg(long, conflicts_with = "target_points")]
    epsilon: Option<f64>,
    /// Autotune epsilon toward this merged sample size.
    #[arg(long = "target-points")]
    target_points: Option<usize>,
}

#[derive(Args, Clone)]
struct ReconstructArgs {
    /// Sampled curve JSON.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    /// `original` (requires --original) or `uniform:K`.
    #[arg(long, default_value = "uniform:1000")]
    grid: String,
    /// Curve providing the original x grid.
    #[arg(long)]
    original: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RenderArgs {
    /// Curve/dataset JSON files; every curve goes into one figure.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long = "type", value_name = "TYPE")]
    spectrum_type: String,
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct ParseArgs {
    /// Wire-format text file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Select one subplot id (case-insensitive).
    #[arg(long)]
    subplot: Option<String>,
    /// Output JSON (a SubplotAnswer, or a list when --subplot is absent).
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct ScoreArgs {
    /// Prediction: wire-format .txt or subplot/curve JSON.
    #[arg(long)]
    pred: PathBuf,
    /// Truth: subplot/curve/dataset JSON or wire-format .txt.
    #[arg(long)]
    truth: PathBuf,
    /// cd, hd, wd, or all.
    #[arg(long, default_value = "all")]
    metric: String,
    /// Keep the squared score denominator for all metrics.
    #[arg(long = "strict-eq2")]
    strict_eq2: bool,
    /// Count unmatched truth lines as zero scores.
    #[arg(long = "penalize-unmatched")]
    penalize_unmatched: bool,
    /// Score in raw axis units instead of the joint unit square.
    #[arg(long = "raw-units")]
    raw_units: bool,
    /// Report JSON path (stdout when absent).
    #[arg(long = "out")]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Curve file or directory of curve/dataset files.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long = "baseline-frac")]
    baseline_frac: Option<f64>,
    /// Merged-sample budget as a fraction of N.
    #[arg(long = "budget-frac", conflicts_with = "epsilon")]
    budget_frac: Option<f64>,
    /// Fixed RDP threshold instead of a budget.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "strict-eq2")]
    strict_eq2: bool,
    #[arg(long = "raw-units")]
    raw_units: bool,
}

#[derive(Args, Clone)]
struct GenArgs {
    /// nmr|ir|xrd|raman|ms|uvvis|xps|all
    #[arg(long = "type", default_value = "all")]
    spectrum_type: String,
    #[arg(long)]
    count: usize,
    #[arg(long = "qc-frac", default_value_t = 0.1)]
    qc_frac: f64,
    #[arg(long = "out")]
    output: PathBuf,
    /// Training answers from pipeline-sampled points or full resolution.
    #[arg(long, default_value = "sampled")]
    arm: String,
    #[arg(long = "retry-cap", default_value_t = 5)]
    retry_cap: usize,
}

#[derive(Args, Clone)]
struct AblationArgs {
    /// Dataset directory produced by `gen`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    /// cd, hd, wd, or all.
    #[arg(long, default_value = "all")]
    metric: String,
}

#[derive(Args, Clone)]
struct ScoreModelOutputsArgs {
    /// Directory of wire-format prediction texts (NAME.txt).
    #[arg(long = "pred-dir")]
    pred_dir: PathBuf,
    /// Directory of truth JSON files (NAME.json).
    #[arg(long = "truth-dir")]
    truth_dir: PathBuf,
    /// CSV manifest `pred,truth` overriding the name-pairing convention.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long = "out")]
    output: PathBuf,
    #[arg(long, default_value = "all")]
    metric: String,
    #[arg(long = "strict-eq2")]
    strict_eq2: bool,
    #[arg(long = "penalize-unmatched")]
    penalize_unmatched: bool,
}

#[derive(Args, Clone)]
struct EvalQaArgs {
    /// QA items as JSONL: {question, ground_truth, prediction, category, language}.
    #[arg(long)]
    items: PathBuf,
    /// local, remote, or auto.
    #[arg(long, default_value = "auto")]
    judge: String,
    #[arg(long)]
    report: PathBuf,
    /// Chat-completions API root, e.g. https://host/v1.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "api-key-env")]
    api_key_env: Option<String>,
    /// Overall column: mean of cells or pooled items.
    #[arg(long, default_value = "mean")]
    overall: String,
    #[arg(long)]
    concurrency: Option<usize>,
}

#[derive(Args, Clone)]
struct ReportArgs {
    /// Directory of per-curve report JSON files from `pipeline`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Savitzky-Golay smoothing of one curve.
    Smooth(SmoothArgs),
    /// Uniform baseline plus RDP critical-point sampling.
    Sample(SampleArgs),
    /// Cubic-spline reconstruction of a sampled curve.
    Reconstruct(ReconstructArgs),
    /// Deterministic SVG figure from curves.
    Render(RenderArgs),
    /// Parse wire-format answers into JSON.
    Parse(ParseArgs),
    /// Score a prediction against a truth subplot.
    Score(ScoreArgs),
    /// smooth -> sample -> reconstruct -> score over a file or directory.
    Pipeline(PipelineArgs),
    /// Generate a synthetic dataset with batch quality control.
    Gen(GenArgs),
    /// Fidelity comparison table of sampling arms over a dataset.
    Ablation(AblationArgs),
    /// Score a directory of model outputs against truth files.
    ScoreModelOutputs(ScoreModelOutputsArgs),
    /// Judge QA items and produce accuracy tables.
    EvalQa(EvalQaArgs),
    /// Aggregate per-curve reports into a summary.
    Report(ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let ctx = match config::RunContext::build(
        cli.config.as_deref(),
        cli.workers,
        cli.sequential,
        cli.seed,
    ) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let result = match cli.command {
        Command::Smooth(args) => cmd_single::smooth(&ctx, &args),
        Command::Sample(args) => cmd_single::sample(&ctx, &args),
        Command::Reconstruct(args) => cmd_single::reconstruct(&ctx, &args),
        Command::Render(args) => cmd_single::render(&ctx, &args),
        Command::Parse(args) => cmd_single::parse(&ctx, &args),
        Command::Score(args) => cmd_single::score(&ctx, &args),
        Command::Pipeline(args) => cmd_batch::pipeline(&ctx, &args),
        Command::Gen(args) => cmd_batch::gen(&ctx, &args),
        Command::Ablation(args) => cmd_batch::ablation(&ctx, &args),
        Command::ScoreModelOutputs(args) => cmd_batch::score_model_outputs(&ctx, &args),
        Command::EvalQa(args) => cmd_qa::eval_qa(&ctx, &args),
        Command::Report(args) => cmd_batch::report(&ctx, &args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
