//! Command-line front end: CSV ingestion, result files, run manifests and
//! replay.

pub mod commands;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use permci::bootstrap::DEFAULT_BOOTSTRAP_LEVEL;
use permci::multivariate::DEFAULT_ADJUST_THRESHOLD;
use permci::simulate::{SimConfig, DEFAULT_X_SEED, STUDY_RHOS};

use crate::dataset::{IngestOptions, StatisticKind};
use crate::error::CliError;
use crate::manifest::{AnalysisConfig, RunConfig, SimulateConfig};
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "permci",
    version,
    about = "Permutation-test confidence intervals and their joint coverage"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Marginal confidence intervals for every response column.
    Ci(AnalysisArgs),
    /// Joint coverage of the marginal intervals and the adjusted level.
    Joint(AnalysisArgs),
    /// Bootstrap intervals for the interval limits.
    Bootstrap(AnalysisArgs),
    /// Equicorrelated regression study of joint coverage.
    Simulate(SimulateArgs),
    /// Re-run a recorded manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub statistic: StatisticKind,
    /// Two-level group column (two-sample mode).
    #[arg(long)]
    pub group_col: Option<String>,
    /// Regressor column (regression mode).
    #[arg(long)]
    pub x_col: Option<String>,
    /// Response columns; defaults to all other columns.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Columns to skip when --columns is not given.
    #[arg(long, value_delimiter = ',')]
    pub exclude_cols: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance on the joint level when adjusting.
    #[arg(long, default_value_t = DEFAULT_ADJUST_THRESHOLD)]
    pub threshold: f64,
    /// Bootstrap replicates.
    #[arg(long = "bootstrap", default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_LEVEL)]
    pub bootstrap_level: f64,
    /// Also write the permutation plan to plan.txt.
    #[arg(long)]
    pub export_plan: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 1000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, value_delimiter = ',')]
    pub rhos: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_ADJUST_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the fixed regressor draw.
    #[arg(long, default_value_t = DEFAULT_X_SEED)]
    pub x_seed: u64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Override the recorded thread count.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl AnalysisArgs {
    pub fn to_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            input: self.input.clone(),
            ingest: IngestOptions {
                statistic: self.statistic,
                group_col: self.group_col.clone(),
                x_col: self.x_col.clone(),
                columns: self.columns.clone(),
                exclude: self.exclude_cols.clone(),
            },
            alpha: self.alpha,
            permutations: self.permutations,
            seed: self.seed,
            threshold: self.threshold,
            bootstrap: self.bootstrap,
            bootstrap_level: self.bootstrap_level,
            format: self.run.format,
            export_plan: self.export_plan,
        }
    }
}

impl SimulateArgs {
    pub fn to_config(&self) -> SimulateConfig {
        SimulateConfig {
            sim: SimConfig {
                n: self.n,
                k: self.k,
                m: self.permutations,
                runs: self.runs,
                alpha: self.alpha,
                threshold: self.threshold,
                seed: self.seed,
                x_seed: self.x_seed,
            },
            rhos: self.rhos.clone().unwrap_or_else(|| STUDY_RHOS.to_vec()),
            format: self.run.format,
        }
    }
}

/// Parsed command line to (config, output dir, threads), or the replay path.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let (config, run) = match &cli.command {
        Command::Ci(a) => (RunConfig::Ci(a.to_config()), &a.run),
        Command::Joint(a) => (RunConfig::Joint(a.to_config()), &a.run),
        Command::Bootstrap(a) => (RunConfig::Bootstrap(a.to_config()), &a.run),
        Command::Simulate(s) => (RunConfig::Simulate(s.to_config()), &s.run),
        Command::Replay(r) => return commands::replay(&r.manifest, &r.output, r.threads),
    };
    if let RunConfig::Ci(a) | RunConfig::Joint(a) | RunConfig::Bootstrap(a) = &config {
        commands::check_analysis(a)?;
        if a.permutations < commands::RECOMMENDED_PERMUTATIONS {
            eprintln!(
                "warning: {} permutations give coarse limits; {} or more is recommended",
                a.permutations,
                commands::RECOMMENDED_PERMUTATIONS
            );
        }
    }
    commands::execute(&config, &run.output, run.threads)
}
