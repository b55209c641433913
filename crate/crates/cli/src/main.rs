//! `trilattice` batch front-end: `simulate`, `verify` and `scan` driven by a flat config
//! file. Exit codes: 0 success, 1 invalid configuration, 2 runtime failure, 3 failed
//! verification.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "trilattice", version, about = "Triangular-lattice crystal sampler and rigidity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more chains and write samples, a summary and checkpoints.
    Simulate { config: PathBuf },
    /// Run the identity and inequality suites and write a report.
    Verify { config: PathBuf },
    /// Sweep a (beta, m) grid and write one table row per point.
    Scan { config: PathBuf },
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<trilattice::Error> for CliError {
    fn from(e: trilattice::Error) -> Self {
        use trilattice::Error as E;
        match e {
            E::LatticeTooSmall { .. }
            | E::InvalidPotential(_)
            | E::InvalidParameter(_)
            | E::RadiusTooLarge { .. }
            | E::TooManyDefects { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config } => commands::simulate(config),
        Command::Verify { config } => commands::verify(config),
        Command::Scan { config } => commands::scan(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trilattice: {e}");
            ExitCode::from(e.code())
        }
    }
}
