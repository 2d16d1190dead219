//! Command-line orchestration of dataset generation, baseline reconstruction
//! and evaluation.

pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Process exit status for configuration problems.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit status for failures while running.
pub const EXIT_RUN: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(mvsense::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(_) => EXIT_RUN,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mvsense::Error> for CliError {
    fn from(e: mvsense::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mvsense", version, about = "Multi-view wireless sensing toolkit")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $MVSENSE_OUTPUT_ROOT/<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set dataset.num_points=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of scenes, channels and point-cloud labels.
    GenDataset(GenDatasetArgs),
    /// Reconstruct dataset samples with BIM or BIM-CS and score them.
    Reconstruct(ReconstructArgs),
    /// Merge baseline records and prediction files into summary statistics.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Pixels per RoI side.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub bs: Option<usize>,
    #[arg(long)]
    pub ue: Option<usize>,
    /// Scene family: `mnist` or `multi-obj`.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points per label cloud.
    #[arg(long)]
    pub points: Option<usize>,
    /// Also store LS-estimated channels at this pilot SNR (dB).
    #[arg(long)]
    pub snr: Option<f64>,
    /// Pilot symbols per subcarrier for the stored estimates.
    #[arg(long)]
    pub pilots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory produced by gen-dataset.
    #[arg(long = "data")]
    pub data: PathBuf,
    /// `bim` or `bim-cs`.
    #[arg(long)]
    pub method: Option<String>,
    /// Pilot SNR in dB.
    #[arg(long, conflicts_with = "noiseless")]
    pub snr: Option<f64>,
    #[arg(long)]
    pub pilots: Option<usize>,
    /// Use the exact channels and skip pilot simulation.
    #[arg(long)]
    pub noiseless: bool,
    /// `train`, `val` or `test`.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// View subset as `BxU`, e.g. `8x16`.
    #[arg(long)]
    pub views: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub cs_weight: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory holding the ground-truth clouds.
    #[arg(long = "data")]
    pub data: Option<PathBuf>,
    /// Record CSV files written by `reconstruct` (repeatable).
    #[arg(long = "records")]
    pub records: Vec<PathBuf>,
    /// Directories of `sample_NNNNNN.points.bin` predictions (repeatable).
    #[arg(long = "predictions")]
    pub predictions: Vec<PathBuf>,
    /// Latent tables `[N, d + 3]` to check against the split and export as CSV.
    #[arg(long = "latents")]
    pub latents: Vec<PathBuf>,
    #[arg(long)]
    pub split: Option<String>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenDataset(args) => commands::gen_dataset(args),
        Command::Reconstruct(args) => commands::reconstruct(args),
        Command::Eval(args) => commands::eval(args),
    }
}
