//! Experiment configuration.
//!
//! A config file is a JSON object holding any subset of the fields of
//! [`ExperimentConfig`]. It is merged over the desk-scale defaults (or the
//! paper-scale preset with `--paper-scale`), so a file only needs the fields
//! it changes.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lis_core::channel::{db_to_linear, ChannelParams};
use lis_core::equalize::EqualizerKind;
use lis_core::latency::{fit_cycle_model, measured_anchors, CycleAnchor, CycleModel, FrameSpec, DEFAULT_CLOCK_HZ};
use lis_core::scenario::{panel_shape, RoomSpec, DEFAULT_PLANE_HEIGHT_M};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LatencyBreakdown,
    SweepFixedM,
    SweepFixedN,
    ChainTrace,
    Validate,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::LatencyBreakdown => "latency-breakdown",
            Experiment::SweepFixedM => "sweep-fixed-m",
            Experiment::SweepFixedN => "sweep-fixed-n",
            Experiment::ChainTrace => "chain-trace",
            Experiment::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub room: RoomSpec,
    pub plane_height_m: f64,
    /// Number of users K.
    pub users: usize,
    pub snr_db: f64,
    pub rician_db: f64,
    pub noise_power: f64,
    pub kinds: Vec<EqualizerKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedMConfig {
    /// Total antennas M, split over each panel count.
    pub total_antennas: usize,
    pub panel_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedNConfig {
    /// Antennas per panel N.
    pub antennas_per_panel: usize,
    pub panel_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub placements: usize,
    pub fading_draws: usize,
    pub master_seed: u64,
    pub percentiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub clock_hz: f64,
    pub per_hop_us: f64,
    /// Cable length between neighbouring panels; 0 leaves the cable delay out.
    pub inter_panel_distance_m: f64,
    /// UE-to-surface distance for the air propagation term; absent leaves it out.
    pub air_distance_m: Option<f64>,
    pub frame: FrameSpec,
    pub cycle_anchors: Vec<CycleAnchor>,
    /// User counts of the breakdown chart.
    pub breakdown_users: Vec<usize>,
    pub breakdown_antennas_per_panel: usize,
    pub breakdown_panels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainTraceConfig {
    pub kind: EqualizerKind,
    pub panels: usize,
    pub antennas_per_panel: usize,
    /// Optional chain order; defaults to panel id order.
    pub order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    pub equivalence_instances: usize,
    pub sinr_instances: usize,
    pub sinr_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub sweep_fixed_m: FixedMConfig,
    pub sweep_fixed_n: FixedNConfig,
    pub monte_carlo: MonteCarloConfig,
    pub latency: LatencyConfig,
    pub chain_trace: ChainTraceConfig,
    pub validate: ValidateConfig,
    pub output_dir: PathBuf,
    pub paper_scale: bool,
}

fn powers_of_two(lo: usize, hi: usize) -> Vec<usize> {
    (0..usize::BITS).map(|e| 1usize << e).filter(|&p| p >= lo && p <= hi).collect()
}

impl ExperimentConfig {
    /// Reduced sizes that finish in seconds to minutes on a workstation.
    pub fn desk() -> Self {
        Self {
            scenario: ScenarioConfig {
                room: RoomSpec::default(),
                plane_height_m: DEFAULT_PLANE_HEIGHT_M,
                users: 16,
                snr_db: 10.0,
                rician_db: 5.0,
                noise_power: 1.0,
                kinds: EqualizerKind::ALL.to_vec(),
            },
            sweep_fixed_m: FixedMConfig {
                total_antennas: 128,
                panel_counts: vec![1, 4, 16, 32],
            },
            sweep_fixed_n: FixedNConfig {
                antennas_per_panel: 16,
                panel_counts: vec![2, 4, 8, 16, 32],
            },
            monte_carlo: MonteCarloConfig {
                placements: 20,
                fading_draws: 100,
                master_seed: 1,
                percentiles: vec![5.0, 50.0],
            },
            latency: LatencyConfig {
                clock_hz: DEFAULT_CLOCK_HZ,
                per_hop_us: lis_core::chain::DEFAULT_PER_HOP_LATENCY_US,
                inter_panel_distance_m: 0.0,
                air_distance_m: None,
                frame: FrameSpec::default(),
                cycle_anchors: measured_anchors(),
                breakdown_users: vec![16, 128],
                breakdown_antennas_per_panel: 16,
                breakdown_panels: 128,
            },
            chain_trace: ChainTraceConfig {
                kind: EqualizerKind::Zf,
                panels: 8,
                antennas_per_panel: 16,
                order: None,
            },
            validate: ValidateConfig {
                equivalence_instances: 1000,
                sinr_instances: 5,
                sinr_draws: 100_000,
            },
            output_dir: PathBuf::from("out"),
            paper_scale: false,
        }
    }

    /// Full-size deployments and realization counts.
    pub fn paper() -> Self {
        let mut cfg = Self::desk();
        cfg.scenario.users = 128;
        cfg.sweep_fixed_m = FixedMConfig {
            total_antennas: 1024,
            panel_counts: powers_of_two(1, 256),
        };
        cfg.sweep_fixed_n = FixedNConfig {
            antennas_per_panel: 16,
            panel_counts: powers_of_two(1, 256),
        };
        cfg.monte_carlo.placements = 100;
        cfg.monte_carlo.fading_draws = 1000;
        cfg.chain_trace.panels = 128;
        cfg.paper_scale = true;
        cfg
    }

    /// Merges a JSON document over `self`. Field errors carry their JSON path.
    pub fn merged_with(&self, overrides: &Value) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, overrides);
        let text = base.to_string();
        let de = &mut serde_json::Deserializer::from_str(&text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("config field `{}`: {}", e.path(), e.inner()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, paper_scale: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = if paper_scale { Self::paper() } else { Self::desk() };
        base.merged_with(&value)
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            rician_factor_linear: db_to_linear(self.scenario.rician_db),
            noise_power: self.scenario.noise_power,
            target_snr_linear: db_to_linear(self.scenario.snr_db),
        }
    }

    pub fn cycle_model(&self) -> Result<CycleModel> {
        fit_cycle_model(&self.latency.cycle_anchors, self.latency.clock_hz).context("config field `latency.cycle_anchors`")
    }

    /// Semantic checks that serde cannot express.
    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        let s = &self.scenario;
        s.room.validate().context("config field `scenario.room`")?;
        self.channel_params().validate().context("config field `scenario`")?;
        if s.users == 0 {
            bail!("config field `scenario.users`: must be at least 1");
        }
        if s.kinds.is_empty() {
            bail!("config field `scenario.kinds`: at least one equalizer kind is required");
        }
        if self.monte_carlo.placements == 0 || self.monte_carlo.fading_draws == 0 {
            bail!("config field `monte_carlo`: placements and fading_draws must be at least 1");
        }
        for (i, p) in self.monte_carlo.percentiles.iter().enumerate() {
            if !(0.0..=100.0).contains(p) {
                bail!("config field `monte_carlo.percentiles[{i}]`: {p} is outside [0, 100]");
            }
        }
        if !(self.latency.per_hop_us >= 0.0) {
            bail!("config field `latency.per_hop_us`: must be non-negative");
        }
        self.cycle_model()?;
        match experiment {
            Experiment::SweepFixedM => {
                let m = self.sweep_fixed_m.total_antennas;
                check_panel_list("sweep_fixed_m.panel_counts", &self.sweep_fixed_m.panel_counts)?;
                for (i, &p) in self.sweep_fixed_m.panel_counts.iter().enumerate() {
                    if !m.is_multiple_of(p) {
                        bail!("config field `sweep_fixed_m.panel_counts[{i}]`: {p} panels do not divide {m} antennas");
                    }
                }
            }
            Experiment::SweepFixedN => {
                check_panel_list("sweep_fixed_n.panel_counts", &self.sweep_fixed_n.panel_counts)?;
                panel_shape(self.sweep_fixed_n.antennas_per_panel).context("config field `sweep_fixed_n.antennas_per_panel`")?;
            }
            Experiment::LatencyBreakdown => {
                if self.latency.breakdown_users.is_empty() || self.latency.breakdown_users.contains(&0) {
                    bail!("config field `latency.breakdown_users`: needs positive user counts");
                }
                if self.latency.breakdown_panels == 0 || self.latency.breakdown_antennas_per_panel == 0 {
                    bail!("config field `latency`: breakdown panels and antennas must be at least 1");
                }
            }
            Experiment::ChainTrace => {
                if self.chain_trace.panels == 0 {
                    bail!("config field `chain_trace.panels`: must be at least 1");
                }
                panel_shape(self.chain_trace.antennas_per_panel).context("config field `chain_trace.antennas_per_panel`")?;
                if let Some(order) = &self.chain_trace.order {
                    if order.len() != self.chain_trace.panels {
                        bail!("config field `chain_trace.order`: expected {} entries", self.chain_trace.panels);
                    }
                }
            }
            Experiment::Validate => {}
        }
        Ok(())
    }
}

fn check_panel_list(path: &str, list: &[usize]) -> Result<()> {
    if list.is_empty() {
        bail!("config field `{path}`: at least one panel count is required");
    }
    for (i, &p) in list.iter().enumerate() {
        if p == 0 {
            bail!("config field `{path}[{i}]`: panel count must be at least 1");
        }
    }
    Ok(())
}

/// Recursive object merge; non-object values in `over` replace those in `base`.
fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}
