//! `kpo`: run photon-number spectroscopy pipelines from a TOML configuration.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_grid, RunConfig};
use error::CliError;
use output::OutputDir;

#[derive(Parser)]
#[command(name = "kpo", version, about = "Qubit spectroscopy of a Kerr parametric oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points and scan rows (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Fock cutoff override.
    #[arg(long, global = true)]
    fock_cutoff: Option<usize>,
    /// Sweep grid override, `MIN:MAX:STEP` in MHz.
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Detuning sweep, extrema and photon-number estimate.
    Sweep,
    /// Estimate accuracy across KPO detunings.
    Scan,
    /// Eigenstates and transition frequencies of the static Hamiltonian.
    Eigen,
    /// Perturbative resonance conditions and amplitudes.
    Resonances,
    /// Steady state and truncation convergence.
    Steady,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(n) = cli.fock_cutoff {
        cfg.numerics.fock_cutoff = n;
    }
    if let Some(g) = &cli.grid {
        cfg.sweep = parse_grid(g)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = OutputDir::create(&cfg)?;
    match cli.command {
        Command::Sweep => commands::cmd_sweep(&cfg, &out),
        Command::Scan => commands::cmd_scan(&cfg, &out),
        Command::Eigen => commands::cmd_eigen(&cfg, &out),
        Command::Resonances => commands::cmd_resonances(&cfg, &out),
        Command::Steady => commands::cmd_steady(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
