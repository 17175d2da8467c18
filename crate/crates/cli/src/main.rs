//! `spp`: synthesize, train, generate, evaluate and build super pseudo panels.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Args, Clone, Debug)]
struct Common {
    /// JSON run configuration (a run manifest also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config entry, e.g. `--set cvae.beta=1.0`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from an oracle data-generating process.
    Synth,
    /// Train a model, or grid-search one with `--grid`.
    Train {
        #[arg(long)]
        grid: bool,
        /// Print the grid plan and stop.
        #[arg(long, requires = "grid")]
        plan_only: bool,
    },
    /// Generate synthetic records for the conditionals in the data.
    Generate,
    /// Compare model output and data over the declared subsets.
    Evaluate,
    /// Move a base population through the years and export trends.
    BuildPanel,
    /// Rank individuals by how much their preferences move between two years.
    ClassifyMovers,
    /// Bootstrap standard deviations of survey statistics.
    Bootstrap,
}

#[derive(Parser)]
#[command(name = "spp", version, about = "CVAE survey synthesis and super pseudo panels")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn run(w: Cli) -> Result<()> {
    let c = &w.common;
    if let Some(n) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = config::load(c.config.as_deref(), &c.overrides, c.seed, c.out.as_deref())?;
    match w.command {
        Command::Synth => commands::synth(&cfg),
        Command::Train { grid, plan_only } => commands::train(&cfg, grid, plan_only),
        Command::Generate => commands::generate(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::BuildPanel => commands::build_panel(&cfg),
        Command::ClassifyMovers => commands::classify_movers(&cfg),
        Command::Bootstrap => commands::bootstrap(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
