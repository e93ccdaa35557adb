//! `macalloc`: scenario-driven experiments for fading multiple-access channels.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::commands::Failure;
use crate::config::{Config, ConfigError};
use crate::output::{unix_ms, Manifest, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Instantaneous and averaged rank tables.
    Regions,
    /// Frank-Wolfe on the averaged (or power-controlled) region.
    Optimize,
    /// Boundary points of the power-controlled region.
    Boundary,
    /// Greedy policy on a simulated trace.
    Simulate,
    /// Gap bounds over an ε grid and spread scales.
    Bounds,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Regions => "regions",
            Command::Optimize => "optimize",
            Command::Boundary => "boundary",
            Command::Simulate => "simulate",
            Command::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "macalloc",
    version,
    about = "Rate and power allocation experiments for fading MACs"
)]
struct Args {
    command: Command,
    /// Scenario file, TOML or JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Print the resolved configuration with every default and exit.
    #[arg(long)]
    print_config: bool,
}

fn run(args: &Args) -> Result<(), Failure> {
    let started = unix_ms();
    let config = match &args.config {
        Some(path) => Config::load(path)?,
        None if args.print_config => Config::example(),
        None => return Err(ConfigError::new("", "--config <path> is required").into()),
    };
    if args.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Failure::Other("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    let root = args.out.clone().unwrap_or_else(|| config.out_dir.clone());
    let mut out = OutputDir::create(&root)?;
    let outcome = match args.command {
        Command::Regions => commands::regions(&config, &mut out),
        Command::Optimize => commands::optimize(&config, &mut out),
        Command::Boundary => commands::boundary(&config, &mut out),
        Command::Simulate => commands::simulate(&config, &mut out),
        Command::Bounds => commands::bounds(&config, &mut out),
    };
    // a non-converged solve still leaves its diagnostics on disk
    if outcome.is_ok() || matches!(outcome, Err(Failure::Solver(_))) {
        out.finish(Manifest::new(
            args.command.name(),
            config.hash(),
            config.seed,
            started,
        ))?;
    }
    outcome
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("macalloc {}: {e}", args.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
