mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CliError, Outcome};

/// Periodic steady-state simulator for FitzHugh-Nagumo cells and networks.
#[derive(Debug, Parser)]
#[command(name = "monosim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the periodic orbit and write trajectory, report and plot.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `solver.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve, integrate with AB2, and compare the aligned orbits.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// AB2 step in seconds (default `reference.step`).
        #[arg(long)]
        ab2_step: Option<f64>,
        /// AB2 horizon in seconds (default `reference.t_end`).
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time the frequency-path resolvent against a dense product.
    Bench {
        /// Comma-separated ascending sample counts.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle suites and write a summary.
    Validate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MONOSIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MONOSIM_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(&config, &out, seed),
        Command::Compare {
            config,
            out,
            ab2_step,
            t_end,
            seed,
        } => commands::compare(&config, &out, ab2_step, t_end, seed),
        Command::Bench { sizes, out } => commands::bench(&sizes, &out),
        Command::Validate {
            out,
            inject_sign_flip,
        } => commands::validate(&out, inject_sign_flip),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            if let Some(msg) = outcome.message() {
                eprintln!("{msg}");
            }
            ExitCode::from(outcome.code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
