//! `ews`: command-line front end for the turbulence early-warning pipeline.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or invalid input,
//! 3 numeric failure (estimation, divergence, undefined metric).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ews_core::neural::PredictorKind;
use ews_core::pipeline::RetrainPolicy;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ews_core::Error> for CliError {
    fn from(e: ews_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else if e.is_numeric() || matches!(e, ews_core::Error::UndefinedMetric(_)) {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ews", version, about = "Stock-market turbulence early warning")]
struct Cli {
    /// TOML config: pipeline settings at top level plus optional
    /// [simulate], [evaluate] and [backtest] tables
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Top-level seed, overriding the config; every component derives its
    /// own stream from it
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log per-step diagnostics to standard error
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a regime-switching panel with its true regimes in a `state` column
    Simulate(SimulateArgs),
    /// Estimate the switching model on the full sample
    Fit(FitArgs),
    /// Label crisis days with the two-peak cutoff
    Label(LabelArgs),
    /// Train a predictor on the training range and write a checkpoint
    Train(TrainArgs),
    /// Run the daily warning loop and write one record per decision day
    Predict(PredictArgs),
    /// Score warning records: metrics, ROC points and onset analysis
    Evaluate(EvaluateArgs),
    /// Compare the warning-gated strategy with buy-and-hold
    Backtest(BacktestArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of panel rows
    #[arg(long)]
    pub t: Option<usize>,
    /// Output panel (delimited text)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input panel with a `log_return` or `close` column
    #[arg(long)]
    pub input: PathBuf,
    /// Estimated parameters (TOML)
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the filtering probabilities here
    #[arg(long)]
    pub probs: Option<PathBuf>,
    /// Number of cold starts
    #[arg(long)]
    pub starts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Parameters written by `fit`
    #[arg(long)]
    pub params: PathBuf,
    /// Crisis series: date, label, cutoff
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the smoothed histogram here
    #[arg(long)]
    pub histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Parameters written by `fit`
    #[arg(long)]
    pub params: PathBuf,
    /// Crisis series written by `label`
    #[arg(long)]
    pub labels: PathBuf,
    /// Model checkpoint (text)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub predictor: Option<PredictorKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Also write the per-epoch training loss here
    #[arg(long)]
    pub losses: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Warning records (delimited text)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    /// Days between model refits
    #[arg(long)]
    pub refit_stride: Option<usize>,
    #[arg(long)]
    pub predictor: Option<PredictorKind>,
    /// `periodic` or `once`
    #[arg(long, value_parser = parse_retrain)]
    pub retrain: Option<RetrainPolicy>,
    /// Training fraction in (0, 1)
    #[arg(long)]
    pub split: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Records written by `predict`
    #[arg(long)]
    pub warnings: PathBuf,
    /// Metrics and onset report (TOML)
    #[arg(long)]
    pub out: PathBuf,
    /// Score against the `state` column of this panel instead of the
    /// real-time labels
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Also write the ROC points here
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Onset matching horizon in days
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Include the training range
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Panel with a `close` column
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub warnings: PathBuf,
    /// Comparison table (delimited text)
    #[arg(long)]
    pub out: PathBuf,
    /// Daily risk-free rate in percent
    #[arg(long)]
    pub rf: Option<f64>,
    /// Cost in percent per position change
    #[arg(long)]
    pub cost: Option<f64>,
    /// Include the training range
    #[arg(long)]
    pub all: bool,
    /// Add a row that exits on the panel's true high-volatility regime
    #[arg(long)]
    pub oracle: bool,
}

fn parse_retrain(s: &str) -> Result<RetrainPolicy, String> {
    match s {
        "periodic" => Ok(RetrainPolicy::Periodic),
        "once" => Ok(RetrainPolicy::Once),
        other => Err(format!("expected `periodic` or `once`, got `{other}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .target(env_logger::Target::Stderr)
        .init();

    let result = config::CliConfig::load(cli.config.as_deref()).and_then(|mut cfg| {
        if let Some(seed) = cli.seed {
            cfg.ews.seed = seed;
        }
        match cli.command {
            Command::Simulate(a) => commands::simulate(&mut cfg, a),
            Command::Fit(a) => commands::fit(&mut cfg, a),
            Command::Label(a) => commands::label(&mut cfg, a),
            Command::Train(a) => commands::train(&mut cfg, a),
            Command::Predict(a) => commands::predict(&mut cfg, a),
            Command::Evaluate(a) => commands::evaluate(&mut cfg, a),
            Command::Backtest(a) => commands::backtest(&mut cfg, a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ews: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
