//! `susphom` command-line driver.
//!
//! Every run reads an optional TOML config, applies flag overrides, writes the resolved
//! config and its artifacts atomically into the output directory, and finishes with a
//! `manifest.json`. Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 solver failure; errors are also printed to stderr as one JSON object.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::artifacts::Artifacts;
use crate::config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
        }
    }
}

impl From<susphom::Error> for CliError {
    fn from(e: susphom::Error) -> Self {
        match e {
            e if e.is_solver_failure() => CliError::Solver(e.to_string()),
            susphom::Error::Io(e) => CliError::Io(e.to_string()),
            susphom::Error::Json(e) => CliError::Io(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "susphom", version, about = "Homogenization of rigid-particle suspensions with random surface forces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Spatial dimension.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(2..=3))]
    dim: Option<u8>,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Cell correctors for the deviatoric basis loadings.
    Cell,
    /// Effective viscosity tensor of the unit cell.
    Tensor,
    /// Averaged surface force at the configured probe velocities.
    Fstar,
    /// Ergodic averages of the particle amplitudes.
    Ergodic,
    /// Homogenized problem on the macro mesh.
    Macro,
    /// Fine-scale problem at one scale and seed.
    Micro,
    /// Convergence sweep of the fine-scale solutions towards the homogenized one.
    Converge,
    /// Dilute-limit slope of the effective shear viscosity.
    Dilute,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Cell => "cell",
            Command::Tensor => "tensor",
            Command::Fstar => "fstar",
            Command::Ergodic => "ergodic",
            Command::Macro => "macro",
            Command::Micro => "micro",
            Command::Converge => "converge",
            Command::Dilute => "dilute",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(d) = cli.dim {
        cfg.dim = d.into();
    }
    let cfg = cfg.resolve()?;
    let resolved = cfg.to_toml()?;
    let mut out = Artifacts::new(&cfg.out);
    out.write("resolved.toml", &resolved)?;
    log::info!("{} with seed {} into {}", cli.command.name(), cfg.seed, cfg.out.display());
    match cli.command {
        Command::Cell => commands::cell(&cfg, &mut out)?,
        Command::Tensor => commands::tensor(&cfg, &mut out)?,
        Command::Fstar => commands::fstar(&cfg, &mut out)?,
        Command::Ergodic => commands::ergodic(&cfg, &mut out)?,
        Command::Macro => commands::macroscale(&cfg, &mut out)?,
        Command::Micro => commands::micro(&cfg, &mut out)?,
        Command::Converge => commands::converge(&cfg, &mut out)?,
        Command::Dilute => commands::dilute(&cfg, &mut out)?,
    }
    out.finish(cli.command.name(), cfg.seed, &resolved)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "error": e.kind(),
                "exit_code": e.exit_code(),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code())
        }
    }
}
