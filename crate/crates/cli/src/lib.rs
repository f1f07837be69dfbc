//! `splinemix` command line: `simulate`, `fit`, `select` and `evaluate`.
//!
//! Each command writes its outputs plus a `manifest.txt` into `--out`.
//! Inputs may be a single dataset or a directory of `rep-*` replicate
//! directories as written by `simulate`; replicates (and chains) fan out over
//! at most `--workers` threads, each task writing only its own files.

mod commands;
mod jobs;
mod manifest;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

pub use commands::{evaluate, fit, fit_chains, select, simulate, ChainFit};
pub use manifest::{RunManifest, MANIFEST_FILE};
use splinemix::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "splinemix", version, about = "Bayesian mixture of smoothing-spline experts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic replicates with known truth.
    Simulate(SimulateArgs),
    /// Fit a mixture with a fixed number of components.
    Fit(FitArgs),
    /// Fit a range of component counts and choose one by DIC.
    Select(SelectArgs),
    /// Score fits against simulation truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario config (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Long-format data file, a directory holding `data.csv`, or a directory
    /// of `rep-*` replicates.
    #[arg(long)]
    pub data: PathBuf,
    /// Covariate file; only valid when `--data` is a file.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Fit config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent chains, pooled after relabeling to a common pivot.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Skip the per-sweep parameter trace.
    #[arg(long)]
    pub no_trace: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Component counts: `2`, `1-4` or `1,2,5`.
    #[arg(long)]
    pub g_range: GRange,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// `truth.csv`, or a `simulate` output directory.
    #[arg(long)]
    pub truth: PathBuf,
    /// A `fit` output directory matching `--truth`.
    #[arg(long)]
    pub fits: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Sorted, de-duplicated component counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GRange(pub Vec<usize>);

impl FromStr for GRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("invalid component range `{s}` (e.g. `2`, `1-4`, `1,2,5`)"));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let mut out = Vec::new();
        for part in s.split(',') {
            match part.split_once('-') {
                Some((lo, hi)) => {
                    let (lo, hi) = (num(lo)?, num(hi)?);
                    if lo > hi {
                        return Err(bad());
                    }
                    out.extend(lo..=hi);
                }
                None => out.push(num(part)?),
            }
        }
        out.sort_unstable();
        out.dedup();
        if out.is_empty() || out[0] == 0 {
            return Err(bad());
        }
        Ok(GRange(out))
    }
}

/// Runs one command and returns its (already written) manifest.
pub fn run(cli: Cli) -> Result<RunManifest> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit(&a),
        Command::Select(a) => select(&a),
        Command::Evaluate(a) => evaluate(&a),
    }
}
