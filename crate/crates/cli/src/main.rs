//! `dressed`: batch front-end for the resolvent toolkit.
//!
//! Exit codes: 0 success, 1 a check exceeded its tolerance, 2 bad configuration, invalid
//! regime or I/O failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Options, Status};

#[derive(Debug, Parser)]
#[command(name = "dressed", version, about = "Emitters in photonic lattices via resolvents")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Imaginary offset for on-shell evaluations; defaults to 1e-8 times the spectral width.
    #[arg(long, global = true)]
    delta: Option<f64>,

    /// Tolerance for the command's oracle or residual check.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Bath eigenvalues, bands and gaps, and optionally <x|G_B(z)|x'> on a grid.
    Spectrum,
    /// Dressed bound states with oracle errors and photonic wavefunctions.
    BoundStates,
    /// Dressed scattering states of a single emitter, one per bath mode.
    Scattering,
    /// Weak-coupling effective Hamiltonian with ω0 in a gap.
    Effective,
    /// Oracle cross-check suite; exit code 1 when any check fails.
    Compare,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Regime(String),
    Compute(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Regime(m) => write!(f, "invalid regime: {m}"),
            CliError::Compute(m) => write!(f, "computation failed: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<dressed_resolvent::Error> for CliError {
    fn from(e: dressed_resolvent::Error) -> Self {
        match e {
            dressed_resolvent::Error::InvalidRegime(m) => CliError::Regime(m),
            other => CliError::Compute(other.to_string()),
        }
    }
}

fn run(cli: &Cli) -> Result<Status, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    for (flag, v) in [("--delta", cli.delta), ("--tol", cli.tol)] {
        if let Some(x) = v {
            if !(x > 0.0) {
                return Err(CliError::Config(format!("{flag} must be positive, got {x}")));
            }
        }
    }
    let cfg = config::load(path)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", cli.out.display())))?;
    let opts = Options {
        out: cli.out.clone(),
        delta: cli.delta,
        tol: cli.tol,
    };
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &opts),
        Command::BoundStates => commands::bound_states(&cfg, &opts),
        Command::Scattering => commands::scattering(&cfg, &opts),
        Command::Effective => commands::effective(&cfg, &opts),
        Command::Compare => commands::compare_cmd(&cfg, &opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
