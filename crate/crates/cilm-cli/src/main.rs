//! Command-line front end for the spatial epidemic toolkit: simulation,
//! clustering, model fitting, assessment, forecasting, benchmarking and the
//! full replicate study, all driven by a TOML config plus a few flags.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "cilm", version, about = "Spatial epidemic models with composite likelihoods")]
struct Cli {
    /// TOML run configuration; flags below override its top-level keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed every random stage derives from.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Thread cap for parallel likelihood and predictive work.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate study populations and epidemics.
    Simulate,
    /// Partition a population by K-means or the Dirichlet process mixture.
    Cluster,
    /// Fit one model by adaptive random-walk Metropolis.
    Fit,
    /// Compare fitted models by WAIC with optional predictive envelopes.
    Assess,
    /// Re-simulate an epidemic beyond an observation cutoff.
    Forecast,
    /// Time the composite likelihood against the full one.
    Bench,
    /// Run the whole simulate-cluster-fit-assess pipeline per scenario.
    ReplicateStudy,
    /// Convert a raw outbreak table into population and events files.
    IngestFmd,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    let ctx = Ctx {
        seed: cfg.seed.unwrap_or(0),
        out: cfg.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        workers: cfg.workers,
    };
    // Bench builds its own pool so its recorded worker count is exact.
    if !matches!(cli.command, Command::Bench) {
        if let Some(workers) = ctx.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build_global()
                .context("setting up the worker pool")?;
        }
    }
    std::fs::create_dir_all(&ctx.out)
        .with_context(|| format!("creating output directory {}", ctx.out.display()))?;

    let section = |name: &str| format!("config file with a [{name}] section required");
    match cli.command {
        Command::Simulate => {
            commands::simulate::run(&cfg.simulate.clone().unwrap_or_default(), &ctx)
        }
        Command::Cluster => {
            commands::cluster::run(cfg.cluster.as_ref().context(section("cluster"))?, &ctx)
        }
        Command::Fit => commands::fit::run(cfg.fit.as_ref().context(section("fit"))?, &ctx),
        Command::Assess => {
            commands::assess::run(cfg.assess.as_ref().context(section("assess"))?, &ctx)
        }
        Command::Forecast => {
            commands::forecast::run(cfg.forecast.as_ref().context(section("forecast"))?, &ctx)
        }
        Command::Bench => commands::bench::run(&cfg.bench.clone().unwrap_or_default(), &ctx),
        Command::ReplicateStudy => {
            commands::study::run(&cfg.study.clone().unwrap_or_default(), &ctx)
        }
        Command::IngestFmd => {
            commands::ingest::run(cfg.ingest.as_ref().context(section("ingest"))?, &ctx)
        }
    }
}
