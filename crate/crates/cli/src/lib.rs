//! Command-line front end for the `znnrad` pipeline.
//!
//! Settings come from a TOML file (`--config`), with `--seed`, `--jobs` and
//! `--output` (or `ZNNRAD_SEED`, `ZNNRAD_JOBS`, `ZNNRAD_OUTPUT`) taking
//! precedence. Exit status is 0 on success, 1 when a stage fails and 2 for
//! usage or configuration errors; failures also print one JSON line to stderr.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod synthetic;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::pipeline::Context;

#[derive(Debug, Parser)]
#[command(name = "znnrad", version, about = "Lung CT radiomics pipeline: denoise, extract, tune, train, evaluate")]
pub struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when absent
    #[arg(long, global = true, env = "ZNNRAD_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true, env = "ZNNRAD_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for per-image stages [default: available parallelism]
    #[arg(long, global = true, env = "ZNNRAD_JOBS")]
    pub jobs: Option<usize>,
    /// Overrides the configured output directory
    #[arg(long, global = true, env = "ZNNRAD_OUTPUT")]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every stage in order, plus config.toml and run_manifest.json
    Run,
    /// Writes phantom images into the output directory
    Synthetic {
        #[arg(long)]
        n_per_class: Option<usize>,
        #[arg(long)]
        image_size: Option<usize>,
    },
    /// Loads, augments and denoises the dataset into denoised.bin
    Denoise {
        /// Dataset directory, instead of the configured one
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// denoised.bin -> features.csv
    Extract {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// features.csv -> tune.json, tune_history.csv
    Tune {
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// features.csv [+ tune.json] -> model.json, residual.csv
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        tune: Option<PathBuf>,
    },
    /// features.csv + model.json -> report.json, per_sample.csv, metrics.svg
    Evaluate {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Residual traces of the three variants under three noise kinds
    NoiseExperiment,
}

/// Applies file and flag settings in order of precedence.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.output {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let mut config = resolve_config(&cli)?;
    if let Command::Synthetic { n_per_class, image_size } = &cli.command {
        if let Some(n) = n_per_class {
            config.synthetic.n_per_class = *n;
        }
        if let Some(s) = image_size {
            config.synthetic.image_size = *s;
        }
    }
    let ctx = Context::new(config, cli.jobs.unwrap_or_else(default_jobs))?;
    match cli.command {
        Command::Run => {
            let manifest = pipeline::cmd_run(&ctx)?;
            log::info!("run finished: {} artifacts", manifest.artifacts.len());
        }
        Command::Synthetic { .. } => {
            synthetic::generate(ctx.output(), &ctx.config.synthetic, ctx.config.seed)?;
        }
        Command::Denoise { input } => {
            pipeline::stage_denoise(&ctx, input.as_deref())?;
        }
        Command::Extract { input } => {
            pipeline::stage_extract(&ctx, input.as_deref())?;
        }
        Command::Tune { features } => {
            pipeline::stage_tune(&ctx, features.as_deref())?;
        }
        Command::Train { features, tune } => {
            pipeline::stage_train(&ctx, features.as_deref(), tune.as_deref())?;
        }
        Command::Evaluate { features, model } => {
            pipeline::stage_evaluate(&ctx, features.as_deref(), model.as_deref())?;
        }
        Command::NoiseExperiment => {
            pipeline::stage_noise_experiment(&ctx)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code != 0 {
                eprintln!("{}", CliError::Usage(e.kind().to_string()).to_json());
            }
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
