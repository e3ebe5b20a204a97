//! `speds`: runs the simulator from JSON configs or built-in presets and
//! writes CSV tables plus a JSON summary.

mod config;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Command;

#[derive(Parser)]
#[command(name = "speds", version, about = "Single-photon source simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Far-field pattern and collection efficiency of a dipole in a planar structure.
    EmissionPattern(Source),
    /// Collection efficiency versus bottom or top mirror periods.
    CavitySweep(Source),
    /// Simulated auto-correlation of a driven dot.
    Hbt(Source),
    /// Cross-correlation between two emission lines.
    CrossCorr(Source),
    /// Photon-rate gain of a faster, better collected source.
    Throughput(Source),
    /// Lists the built-in presets.
    Presets,
}

#[derive(Args)]
struct Source {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration, see `speds presets`.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<speds_core::Error> for Failure {
    fn from(e: speds_core::Error) -> Self {
        match e {
            speds_core::Error::InvalidInput { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, source) = match cli.command {
        Sub::EmissionPattern(s) => (Command::EmissionPattern, s),
        Sub::CavitySweep(s) => (Command::CavitySweep, s),
        Sub::Hbt(s) => (Command::Hbt, s),
        Sub::CrossCorr(s) => (Command::CrossCorr, s),
        Sub::Throughput(s) => (Command::Throughput, s),
        Sub::Presets => {
            for p in config::PRESETS {
                println!("{:<22} {}", p.name, p.command.name());
            }
            return ExitCode::SUCCESS;
        }
    };
    let request = run::Request {
        command,
        config: source.config,
        preset: source.preset,
        seed: source.seed,
        out: source.out,
    };
    match run::execute(&request) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
