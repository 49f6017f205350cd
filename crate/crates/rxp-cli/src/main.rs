//! `rxp` — train residual autoencoders on wayside sensor data, flag
//! anomalous records, and explain them with residual attribution or
//! Shapley-value sampling.
//!
//! Every run is driven by one top-level `--seed` (or the `seed` field of
//! the run configuration); all internal randomness is derived from it by
//! name, so re-running a command with the same inputs reproduces every
//! artifact byte for byte. Errors print a JSON object on stderr and exit
//! with 2 for configuration problems, 3 for I/O problems, 1 otherwise.

mod commands;
mod config;
mod errors;
mod manifest;
mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::errors::{CliError, Result};

#[derive(Parser)]
#[command(name = "rxp", version, about = "Anomaly detection and explanation for wayside sensor streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sensor dataset CSV
    GenData {
        /// Dataset description JSON; defaults to the built-in 64-channel layout
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Top-level seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train a detector and write its envelope plus a training summary
    Train {
        /// Run configuration JSON
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the configuration's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configuration's output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every record of a CSV against a trained detector
    Detect {
        /// Detector envelope JSON written by `train`
        #[arg(long)]
        detector: PathBuf,
        /// Input data CSV
        #[arg(long)]
        data: PathBuf,
        /// Output CSV (`score,is_anomaly` per record); stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explain one record with rxp, sampled Shapley values, or exact Shapley values
    Explain {
        /// Detector envelope JSON written by `train`
        #[arg(long)]
        detector: PathBuf,
        /// Input data CSV (also the background for Shapley methods)
        #[arg(long)]
        data: PathBuf,
        /// Zero-based record index to explain
        #[arg(long)]
        record: usize,
        /// rxp, shap1, shap2, shap3, or exact
        #[arg(long, default_value = "rxp")]
        method: String,
        /// How many top features to report
        #[arg(long)]
        top_k: Option<usize>,
        /// Top-level seed (drives Shapley sampling)
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Explanation JSON path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render a relevance bar chart to this SVG path
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Keep wall-clock timing in the JSON (off by default so reruns
        /// are byte-identical)
        #[arg(long)]
        timing: bool,
    },
    /// Train, evaluate, and compare explainers; write the full report
    Benchmark {
        /// Run configuration JSON
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the configuration's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configuration's output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Loads the run configuration, then applies command-line overrides.
fn resolve_config(
    path: Option<&PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    Ok(cfg)
}

/// Worker-thread override for the benchmark: 0 forces the serial path.
fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("RXP_THREADS") {
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::config(format!("RXP_THREADS must be an integer, got {raw:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { spec, out, seed } => commands::gen_data(spec.as_deref(), &out, seed),
        Command::Train { config, seed, out } => {
            let cfg = resolve_config(config.as_ref(), seed, out)?;
            commands::train(&cfg)
        }
        Command::Detect {
            detector,
            data,
            out,
        } => commands::detect(&detector, &data, out.as_deref()),
        Command::Explain {
            detector,
            data,
            record,
            method,
            top_k,
            seed,
            out,
            svg,
            timing,
        } => commands::explain(&commands::ExplainArgs {
            detector_path: &detector,
            data_path: &data,
            record,
            method,
            top_k,
            seed,
            out,
            svg,
            timing,
        }),
        Command::Benchmark { config, seed, out } => {
            let cfg = resolve_config(config.as_ref(), seed, out)?;
            commands::benchmark(&cfg, threads_from_env()?)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{}", err.to_json());
        std::process::exit(err.exit_code());
    }
}
