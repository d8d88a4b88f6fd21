//! `rankone` command-line driver.
//!
//! Exit codes: 0 pass, 1 domain failure, 2 config or I/O error, 3 work
//! budget exhausted.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rankone", version, about = "Rank-one Z^d schedules: validation, entropy scans and tower refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a schedule for separation and containment; report coverage and eccentricity.
    Validate(CommonArgs),
    /// Directional entropy brackets along the time schedule, with decay verdicts.
    Scan(CommonArgs),
    /// Verify the good-level, bad-level and Y-mass bounds on a grid.
    Bounds(CommonArgs),
    /// Refine a perturbed odometer tower sequence and check the Cauchy bounds.
    Refine(CommonArgs),
}

#[derive(Args, Clone, Debug)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Budget(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Budget(_) => 3,
        }
    }

    /// Errors raised while turning the config into objects.
    pub fn from_setup(e: rankone::Error) -> Self {
        match e {
            rankone::Error::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            rankone::Error::InvalidSchedule(_) => CliError::Domain(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }

    /// Errors raised by the computation itself.
    pub fn from_run(e: rankone::Error) -> Self {
        match e {
            rankone::Error::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
            CliError::Domain(m) => write!(f, "{m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Validate(a) => ("validate", a),
        Command::Scan(a) => ("scan", a),
        Command::Bounds(a) => ("bounds", a),
        Command::Refine(a) => ("refine", a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("could not size thread pool: {e}");
        }
    }
    match commands::run(name, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rankone {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
