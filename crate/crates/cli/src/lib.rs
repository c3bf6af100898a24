//! Command-line driver: preprocessing, warm start, per-iteration selection, statistics and simulation.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use sizebal_core::Result;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "sizebal",
    version,
    about = "Size-balanced active learning for LiDAR segmentation"
)]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for frame-level work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset to <out>/dataset.
    Generate {
        /// Print the default synthetic spec as JSON and exit.
        #[arg(long)]
        print_spec: bool,
    },
    /// Ground split, clustering and size partitioning of every frame.
    Preprocess,
    /// Random per-partition warm start (iteration 0).
    Warmstart,
    /// One active selection round from the current model files.
    Select {
        #[arg(long)]
        iteration: usize,
    },
    /// Full loop against the built-in mock model.
    Simulate,
    /// Class report of a labeled set (latest iteration by default).
    Stats {
        #[arg(long)]
        iteration: Option<usize>,
    },
}

pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    base.finish(cli.seed, cli.jobs, cli.out.clone())
}

pub fn run(cli: Cli) -> Result<()> {
    if let Command::Generate { print_spec: true } = cli.command {
        println!("{}", commands::default_spec_json());
        return Ok(());
    }
    let cfg = load_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| {
            sizebal_core::Error::Config(format!("cannot start {} worker threads: {e}", cfg.jobs))
        })?;
    pool.install(|| match cli.command {
        Command::Generate { .. } => commands::cmd_generate(&cfg).map(drop),
        Command::Preprocess => commands::cmd_preprocess(&cfg).map(drop),
        Command::Warmstart => commands::cmd_warmstart(&cfg).map(drop),
        Command::Select { iteration } => commands::cmd_select(&cfg, iteration).map(drop),
        Command::Simulate => commands::cmd_simulate(&cfg).map(drop),
        Command::Stats { iteration } => commands::cmd_stats(&cfg, iteration).map(drop),
    })
}
