//! `ionramp`: design, verify and sweep trap-frequency ramps for ion chains.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{Figure, Output, Status};
use config::RunConfig;

const EXIT_FAILURE: u8 = 1;
const EXIT_UNCONVERGED: u8 = 2;
const EXIT_INVALID_PROTOCOL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ionramp",
    version,
    about = "Fast expansions and compressions of trapped-ion chains"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normal-mode frequency ratios and eigenvectors of the chain.
    Modes,
    /// Design a protocol for the configured final time.
    Design,
    /// Simulate the full classical dynamics and report the final excitation.
    Verify {
        /// Protocol CSV written by `design`; otherwise built from the config.
        #[arg(long)]
        protocol: Option<PathBuf>,
    },
    /// Final excitation over the configured final-time grid.
    Sweep,
    /// Data behind one of the standard excitation-versus-time figures.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Unconverged) => ExitCode::from(EXIT_UNCONVERGED),
        Err(err) => {
            eprintln!("error: {err:#}");
            let invalid_protocol = err.chain().any(|e| {
                matches!(
                    e.downcast_ref::<ionramp::Error>(),
                    Some(ionramp::Error::InvalidProtocol { .. })
                )
            });
            ExitCode::from(if invalid_protocol {
                EXIT_INVALID_PROTOCOL
            } else {
                EXIT_FAILURE
            })
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    if let Some(n) = cli.threads {
        set_threads(n)?;
    }
    let cfg = match (&cli.config, &cli.command) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Command::Reproduce { .. }) => commands::figure_defaults(),
        (None, _) => anyhow::bail!("--config <FILE> is required for this command"),
    };
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let name = match &cli.command {
        Command::Modes => "modes".to_string(),
        Command::Design => "design".to_string(),
        Command::Verify { .. } => "verify".to_string(),
        Command::Sweep => "sweep".to_string(),
        Command::Reproduce { figure } => format!("reproduce {figure:?}").to_lowercase(),
    };
    let out = Output::new(&dir, &cfg, &name);
    match &cli.command {
        Command::Modes => commands::modes(&cfg, &out),
        Command::Design => commands::design(&cfg, &out),
        Command::Verify { protocol } => commands::verify(&cfg, protocol.as_deref(), &out),
        Command::Sweep => commands::sweep(&cfg, &out),
        Command::Reproduce { figure } => commands::reproduce(*figure, &cfg, &out),
    }
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the thread pool")
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_n: usize) -> Result<()> {
    Ok(())
}
