mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use softgrasp::fem::Parallelism;

use crate::commands::Context;
use crate::config::SceneConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "softgrasp", version, about = "Rigid and soft-body grasp simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scene configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (output file for meshgen; input directory for strain-report).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sequential element loops, for byte-identical reruns.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the object mesh and check it.
    Meshgen,
    /// Rigid-engine grasp at every actuation level.
    GraspRigid,
    /// FEM indentation with VTK series, contact forces and strain report.
    GraspFem,
    /// Grasp-and-pull sweep in both engines.
    PullSweep,
    /// Strain summary of the state saved by grasp-fem.
    StrainReport,
    /// Check the configuration and print derived settings.
    Validate,
}

fn threads() -> Result<Option<usize>, CliError> {
    match std::env::var("SOFTGRASP_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("SOFTGRASP_THREADS: expected a positive integer, got `{v}`"))),
        },
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config: required".into()))?;
    let config = SceneConfig::load(&path)?;
    if let Some(n) = threads()? {
        // Fails only when a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let parallelism = if cli.deterministic { Parallelism::Sequential } else { Parallelism::Parallel };
    let ctx = Context { config, out: cli.out, force: cli.force, parallelism };
    match cli.command {
        Command::Meshgen => commands::meshgen(&ctx),
        Command::GraspRigid => commands::grasp_rigid(&ctx),
        Command::GraspFem => commands::grasp_fem(&ctx),
        Command::PullSweep => commands::pull_sweep(&ctx),
        Command::StrainReport => commands::strain_report_cmd(&ctx),
        Command::Validate => commands::validate(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("softgrasp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
