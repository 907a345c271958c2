//! Batch front end: load a run configuration, run one subcommand, emit a
//! table, CSV or JSON on standard output.

pub mod commands;
pub mod config;
pub mod render;

use std::path::PathBuf;

use adjseq_core::boundary::Method;
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{Format, Source};
use render::Envelope;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "adjseq",
    version,
    about = "Adjusted sequential p-values for group sequential designs with multiple hypotheses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON, or TOML by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured method.
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// Overrides the configured FWER level.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; all available by default.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the multivariate normal error tolerance.
    #[arg(long, global = true)]
    pub mvn_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weights of every intersection hypothesis.
    Weights,
    /// Correlation of all test statistics.
    Corr,
    /// Critical values of every intersection at level alpha.
    Bounds,
    /// Closed test at analyses up to --analysis.
    Analyze {
        /// One-based; defaults to the last analysis with data.
        #[arg(long)]
        analysis: Option<usize>,
    },
    /// Monte Carlo FWER and rejection rates.
    Simulate {
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Weights => "weights",
            Command::Corr => "corr",
            Command::Bounds => "bounds",
            Command::Analyze { .. } => "analyze",
            Command::Simulate { .. } => "simulate",
        }
    }
}

/// Process exit status for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|c| {
        c.downcast_ref::<adjseq_core::Error>()
            .is_some_and(|e| e.is_numerical())
    });
    if numerical {
        2
    } else {
        1
    }
}

fn emit<T: Serialize>(cli: &Cli, digest: &str, seed: u64, result: &T) -> Result<String> {
    Envelope::new(cli.command.name(), digest, seed, result).to_json()
}

/// Runs one invocation and returns what goes to standard output.
pub fn run(cli: &Cli) -> Result<String> {
    if let Some(t) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let path = cli.config.as_ref().context("--config is required")?;
    let source = Source::read(path)?;
    let mut config = source.config;
    if let Some(a) = cli.alpha {
        config.alpha = a;
    }
    if let Some(m) = cli.method {
        config.method = m;
    }
    if let Some(t) = cli.mvn_tol {
        config.mvn.tol = t;
    }
    let format = cli.format.or(config.format).unwrap_or(Format::Table);
    let loaded = config.load()?;
    let (method, alpha, mvn_seed) = (
        loaded.config.method,
        loaded.config.alpha,
        loaded.config.mvn.seed,
    );

    match &cli.command {
        Command::Weights => {
            let t = commands::weights(&loaded)?;
            match format {
                Format::Table => Ok(render::weights_table(&t)),
                Format::Csv => render::weights_csv(&t),
                Format::Json => emit(cli, &source.digest, mvn_seed, &t),
            }
        }
        Command::Corr => {
            let c = commands::correlation(&loaded)?;
            match format {
                Format::Table => Ok(render::corr_table(&c)),
                Format::Csv => render::corr_csv(&c),
                Format::Json => emit(cli, &source.digest, mvn_seed, &c),
            }
        }
        Command::Bounds => {
            let b = commands::bounds(&loaded, method, alpha)?;
            match format {
                Format::Table => Ok(render::bounds_table(&b)),
                Format::Csv => render::bounds_csv(&b),
                Format::Json => emit(cli, &source.digest, mvn_seed, &b),
            }
        }
        Command::Analyze { analysis } => {
            let r = commands::analyze(&loaded, method, alpha, *analysis)?;
            match format {
                Format::Table => Ok(render::analyze_table(&r)),
                Format::Csv => render::analyze_csv(&r),
                Format::Json => emit(cli, &source.digest, mvn_seed, &r),
            }
        }
        Command::Simulate { reps, seed } => {
            let s = commands::simulation(&loaded, method, alpha, *reps, *seed)?;
            let labels = loaded.design.hypotheses.labels();
            match format {
                Format::Table => Ok(render::simulate_table(&s, labels)),
                Format::Csv => render::simulate_csv(&s, labels),
                Format::Json => emit(cli, &source.digest, mvn_seed, &s),
            }
        }
    }
}
