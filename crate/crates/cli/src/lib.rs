//! The `sapm` command line as a library: argument types plus [`run`], so
//! pipelines can be driven in-process.
//!
//! Every command computes all of its outputs in memory first; the output
//! directory is only touched once the whole run has succeeded.

mod commands;
mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sapm_core::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use output::Outputs;

#[derive(Debug, Parser)]
#[command(name = "sapm", version, about = "Synthetic-aperture projection mapping toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Render the scene with and without occluders and report shadows.
    Simulate(RunArgs),
    /// Solve for projector inputs that reproduce a target appearance.
    Compensate(RunArgs),
    /// Count the projectors reaching each visible surface point.
    Coverage(RunArgs),
    /// Run the structured-light and landmark calibration chain.
    Calibrate(RunArgs),
    /// Time merged against per-projector solves over array sizes.
    Bench(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write manifest.json with the config hash and versions.
    #[arg(long)]
    pub manifest: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Compensate(_) => "compensate",
            Command::Coverage(_) => "coverage",
            Command::Calibrate(_) => "calibrate",
            Command::Bench(_) => "bench",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Compensate(a)
            | Command::Coverage(a)
            | Command::Calibrate(a)
            | Command::Bench(a) => a,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: String,
    config_sha256: String,
    seed: u64,
    sapm_cli: &'a str,
    sapm_core: &'a str,
    files: Vec<String>,
}

/// Runs `command` and returns the paths written.
pub fn run(command: &Command) -> Result<Vec<PathBuf>> {
    let args = command.args();
    if args.out.exists() && !args.out.is_dir() {
        anyhow::bail!("output path {} is not a directory", args.out.display());
    }
    let mut cfg =
        RunConfig::load(&args.config).with_context(|| format!("invalid config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mut out = match command {
        Command::Simulate(_) => commands::simulate(&cfg)?,
        Command::Compensate(_) => commands::compensate(&cfg)?,
        Command::Coverage(_) => commands::coverage(&cfg)?,
        Command::Calibrate(_) => commands::calibrate(&cfg)?,
        Command::Bench(_) => commands::bench(&cfg)?,
    };
    if args.manifest {
        let manifest = Manifest {
            command: command.name(),
            config: args
                .config
                .file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            config_sha256: hex::encode(Sha256::digest(cfg.text.as_bytes())),
            seed: cfg.seed,
            sapm_cli: env!("CARGO_PKG_VERSION"),
            sapm_core: sapm_core::VERSION,
            files: out.names(),
        };
        out.json("manifest.json", &manifest)?;
    }
    out.write_to(&args.out)
}
