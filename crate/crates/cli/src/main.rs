use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use lis_sim::{run, write_outputs, Experiment, ExperimentConfig};
use log::{info, warn};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "LIS_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lis-sim", version, about = "Panel-based LIS uplink: latency and spectral-efficiency experiments")]
struct Args {
    experiment: Experiment,
    /// JSON config; any subset of fields, merged over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Start from full-size deployments and realization counts.
    #[arg(long)]
    paper_scale: bool,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main_inner() -> Result<bool> {
    let args = Args::parse();
    init_threads()?;
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path, args.paper_scale)?,
        None if args.paper_scale => ExperimentConfig::paper(),
        None => ExperimentConfig::desk(),
    };
    if let Some(seed) = args.seed {
        cfg.monte_carlo.master_seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if cfg.paper_scale && matches!(args.experiment, Experiment::SweepFixedM | Experiment::SweepFixedN) {
        warn!(
            "paper-scale sweep: {} placements x {} fading draws per point, expect a long run",
            cfg.monte_carlo.placements, cfg.monte_carlo.fading_draws
        );
    }
    let (output, ok) = run(args.experiment, &cfg)?;
    write_outputs(&cfg.output_dir, &output)?;
    print!("{}", output.summary);
    info!("wrote {} files to {}", output.files.len(), cfg.output_dir.display());
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
