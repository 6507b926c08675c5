//! Experiment runner for the panel-based LIS uplink simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod validate;

use anyhow::Result;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{write_outputs, ExperimentOutput};

/// Runs one experiment and returns its files plus whether it succeeded.
/// Only `validate` can report failure without an error.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<(ExperimentOutput, bool)> {
    Ok(match experiment {
        Experiment::LatencyBreakdown => (experiments::run_latency_breakdown(cfg)?.1, true),
        Experiment::SweepFixedM => (experiments::run_sweep_fixed_m(cfg)?.1, true),
        Experiment::SweepFixedN => (experiments::run_sweep_fixed_n(cfg)?.1, true),
        Experiment::ChainTrace => (experiments::run_chain_trace(cfg)?.1, true),
        Experiment::Validate => {
            let (report, out) = validate::run_validate(cfg)?;
            (out, report.all_passed())
        }
    })
}
