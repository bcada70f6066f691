//! Experiment runner for belief aggregation and rollout.
//!
//! Every verb reads an [`config::ExperimentConfig`] (only
//! `count-representatives` runs without one), writes its results under
//! `--out`, and is deterministic given `--seed`. CSV files start with a
//! `#` comment carrying the SHA-256 of the config bytes and the seed.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

mod commands;
pub mod config;
mod output;

pub use commands::{AdaptationPoint, AdaptationRecord, SolveSummary};

#[derive(Debug, Parser)]
#[command(name = "beliefctl", version, about)]
pub struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; all available cores if absent.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Leave wall-time fields out of the outputs.
    #[arg(long, global = true)]
    pub no_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and solve the aggregate MDP; writes bundle.json and
    /// solve_summary.json.
    Solve,
    /// Monte Carlo costs of the base and rollout policies; writes
    /// evaluation.csv.
    Evaluate {
        /// Solved bundle; overrides the config's `bundle`.
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Also write per-decision planning reports of one rollout episode
        /// to trace.jsonl.
        #[arg(long)]
        trace: bool,
    },
    /// Error bound versus observed error over a resolution sweep; writes
    /// bound.csv.
    BoundExperiment,
    /// Rollout cost after a scenario switch across compute budgets; writes
    /// adaptation.json.
    Adaptation,
    /// Grid sizes per feature count and resolution; writes
    /// representatives.csv.
    CountRepresentatives,
    /// Fine identity-aggregation solution; writes oracle_bundle.json and
    /// oracle.csv.
    Oracle,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] beliefctl_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use beliefctl_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::InvalidModel(_)
                | E::InvalidBelief(_)
                | E::InvalidArgument(_)
                | E::Json(_)
                | E::MetricUndefined(_),
            ) => 2,
            CliError::Core(
                E::CapacityExceeded { .. } | E::NonConvergence { .. } | E::BudgetExceeded { .. },
            ) => 3,
            _ => 1,
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    std::fs::create_dir_all(&cli.out)?;
    commands::dispatch(cli)
}
