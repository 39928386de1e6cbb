//! `rscdt` command-line tool: synthetic data, transforms, distances and the
//! nearest-subspace classifier.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rscdt::ErrorKind;

use config::{ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rscdt::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rscdt", version, about = "Signed transport transforms and nearest-subspace classification of images")]
struct Cli {
    /// JSON file with default settings; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the two-class signed-circles dataset and its manifest to --out
    Generate {
        /// Also write signed preview PNGs under <out>/previews
        #[arg(long)]
        previews: bool,
    },
    /// Transform an image (PNG or container) and write the feature container to --out
    Transform { input: PathBuf },
    /// Invert a feature container into an image at --out (container, or PNG preview)
    Reconstruct {
        input: PathBuf,
        /// Image whose grid is used and against which the error is reported
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Signed sliced-Wasserstein distance between two images
    Distance {
        a: PathBuf,
        b: PathBuf,
        /// Also print the Euclidean distance of the flattened features
        #[arg(long)]
        check_isometry: bool,
    },
    /// Train a nearest-subspace model from a manifest into the directory --out
    Train {
        /// Manifest CSV, or a folder laid out as <dir>/<label>/*.png
        #[arg(long)]
        manifest: PathBuf,
        /// Manifest split to use [default: train, or all rows if untagged]
        #[arg(long)]
        split: Option<String>,
    },
    /// Classify images with a trained model
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Evaluate a model on a manifest; writes report.csv and residuals.csv into --out
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Manifest CSV, or a folder laid out as <dir>/<label>/*.png
        #[arg(long)]
        manifest: PathBuf,
        /// Manifest split to use [default: test, or all rows if untagged]
        #[arg(long)]
        split: Option<String>,
    },
    /// Apply the difference-of-Gaussians filter (--dog, default 1,2) and write to --out
    FilterDog { input: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = cli.config.as_deref();
    let resolve = || ExperimentConfig::resolve(ExperimentConfig::default(), file, &cli.overrides);
    match &cli.command {
        Command::Generate { previews } => commands::generate(&resolve()?, *previews),
        Command::Transform { input } => commands::transform(&resolve()?, input),
        Command::Reconstruct { input, compare } => commands::reconstruct(&resolve()?, input, compare.as_deref()),
        Command::Distance { a, b, check_isometry } => commands::distance(&resolve()?, a, b, *check_isometry),
        Command::Train { manifest, split } => commands::train_cmd(&resolve()?, manifest, split.as_deref()),
        Command::Predict { model, inputs } => {
            let (model, cfg) = commands::load_model(model, file, &cli.overrides)?;
            commands::predict(&model, &cfg, inputs)
        }
        Command::Evaluate { model, manifest, split } => {
            let (model, cfg) = commands::load_model(model, file, &cli.overrides)?;
            commands::evaluate_cmd(&model, &cfg, manifest, split.as_deref())
        }
        Command::FilterDog { input } => commands::filter_dog(&resolve()?, input),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
