//! Command-line front end: configuration ingestion, command dispatch, and
//! machine-readable result emission.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 censoring overflow.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
    Censoring { censored: usize, total: usize },
}

impl CliError {
    pub fn config(msg: String) -> Self {
        CliError::Config(msg)
    }

    pub fn numeric(msg: String) -> Self {
        CliError::Numeric(msg)
    }

    pub fn io(msg: String) -> Self {
        CliError::Io(msg)
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
            CliError::Censoring { .. } => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Censoring { censored, total } => write!(
                f,
                "censoring overflow: {censored} of {total} replications hit the horizon"
            ),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "kpartite",
    version,
    about = "Transition times, limit laws, starvation and mixing bounds for dense random-access networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limit parameters, scenario label, and asymptotic mean of a transition.
    Classify(CommonArgs),
    /// Asymptotic mean transition time against the exact linear-solve value.
    Mean(CommonArgs),
    /// Evaluate the limit law: CSV of (x, pdf, cdf) plus the atom at zero.
    Law(CommonArgs),
    /// Sample transition times, scale by the exact mean, compare to the law.
    Simulate(CommonArgs),
    /// Empirical zero-throughput probabilities over mean-scaled windows.
    Starve(CommonArgs),
    /// Branch conductance and certified mixing-time lower bounds.
    Mix(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the activation parameter nu.
    #[arg(long)]
    nu: Option<f64>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory for report.json and CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for simulation (default: all cores). Does not change
    /// results.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Classify(a) => ("classify", a),
        Command::Mean(a) => ("mean", a),
        Command::Law(a) => ("law", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Starve(a) => ("starve", a),
        Command::Mix(a) => ("mix", a),
    };
    if let Some(workers) = args.workers {
        // build the global pool once; later calls would fail, which is fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match commands::run(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
