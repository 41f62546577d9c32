//! `levyspin`: config-driven batch runs of the spectral, partition-function
//! and Monte Carlo computations.

mod cache;
mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::cache::Cache;
use crate::commands::{CmdError, Context};
use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "levyspin", version, about = "Killed time-changed Levy processes and their spin chains")]
struct Cli {
    /// Run configuration (key = value lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides mc.seed for every stochastic step.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Only warnings and errors on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate v^r and its value at 0 for small r.
    Potential,
    /// Solve for the leading eigenpairs and print gamma, E, gap and C.
    Spectrum,
    /// Z_n and Z^f_n over a range of n, with the Z_2 cross-checks.
    Partition {
        /// Comma-separated orders n (overrides partition.orders).
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<u32>>,
    },
    /// Moments of the lifetime from kernel products.
    Moments,
    /// Monte Carlo lifetimes: survival curve and moments.
    Simulate,
    /// Metropolis sampling of the ring spin system.
    Gibbs,
    /// Decay rate against its small-r prediction.
    Smallr {
        /// Comma-separated kill rates (overrides smallr.rates).
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
    },
    /// Full cross-check battery with one JSON verdict per check.
    Verify {
        #[arg(long, hide = true)]
        tamper_kernel: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Potential => "potential",
            Command::Spectrum => "spectrum",
            Command::Partition { .. } => "partition",
            Command::Moments => "moments",
            Command::Simulate => "simulate",
            Command::Gibbs => "gibbs",
            Command::Smallr { .. } => "smallr",
            Command::Verify { .. } => "verify",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    let path = cli.config.as_ref().ok_or_else(|| config::ConfigError::File {
        path: "<none>".into(),
        message: "--config PATH is required".into(),
    })?;
    let cfg = RunConfig::load(path, cli.seed)?;
    log::info!("{}: config hash {}", cli.command.name(), cfg.hash());
    let cache = Cache::new(&cfg, &cli.out);
    let ctx = Context {
        cfg: &cfg,
        out: &cli.out,
        cache,
    };
    match &cli.command {
        Command::Potential => commands::potential(&ctx),
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Partition { orders } => {
            if let Some(&n) = orders.iter().flatten().find(|&&n| n < 2) {
                return Err(levyspin::Error::InvalidParameter(format!("orders must be at least 2, got {n}")).into());
            }
            commands::partition(&ctx, orders.as_deref())
        }
        Command::Moments => commands::moments(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Gibbs => commands::gibbs(&ctx),
        Command::Smallr { rates } => commands::smallr(&ctx, rates.as_deref()),
        Command::Verify { tamper_kernel } => commands::verify(&ctx, *tamper_kernel),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
