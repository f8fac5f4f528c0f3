//! Batch front-end: synthesise CSI, validate and featurize sessions, train
//! and evaluate the gesture network, and render reports.
//!
//! Logs go to stderr; stdout carries only short machine-readable summaries.

pub mod commands;
pub mod config;
pub mod corpus;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;
use wigest_core::{CsiError, ProcessError};
use wigest_eval::TrainError;
use wigest_nn::NnError;

pub use config::PipelineConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    MissingInput(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// 1 bad arguments or config, 2 missing inputs, 3 internal or numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::MissingInput(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<CsiError> for CliError {
    fn from(e: CsiError) -> Self {
        CliError::MissingInput(e.to_string())
    }
}

impl From<ProcessError> for CliError {
    fn from(e: ProcessError) -> Self {
        match e {
            ProcessError::Csi(e) => e.into(),
            ProcessError::Precondition(_) | ProcessError::Domain(_) => CliError::Config(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Split(_) | TrainError::Empty(_) => CliError::Config(e.to_string()),
            TrainError::Numeric { .. } | TrainError::Nn(_) => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wigest", version, about = "WiFi CSI gesture recognition pipeline")]
pub struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for featurization; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic corpus of session manifests and CSI files.
    Synth,
    /// Check every session in a corpus for missing receivers, drops and mismatches.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Turn every valid session into a fused Doppler image (PNG + binary).
    Featurize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Train under the configured protocol; writes checkpoints and metrics.
    Train {
        /// Featurized corpus.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Evaluate saved checkpoints on the test side of the configured split.
    Eval {
        /// Featurized corpus.
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory holding `run<k>.gnet` checkpoints.
        #[arg(long)]
        model: PathBuf,
    },
    /// Summarise a metrics CSV: per-run accuracy, mean and pooled confusion.
    Report {
        /// Metrics CSV, or a directory containing `metrics.csv`.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = || {
        cli.out
            .clone()
            .ok_or_else(|| CliError::Config("--out <dir> is required for this command".into()))
    };
    match &cli.command {
        Command::Synth => commands::synth(&cfg, &out()?),
        Command::Validate { input } => commands::validate(&cfg, input),
        Command::Featurize { input } => commands::featurize(&cfg, input, &out()?, cli.jobs),
        Command::Train { input } => commands::train(&cfg, input, &out()?),
        Command::Eval { input, model } => commands::eval(&cfg, input, model, &out()?),
        Command::Report { input } => commands::report(input, cli.out.as_deref()),
    }
}
