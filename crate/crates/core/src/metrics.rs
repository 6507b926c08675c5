//! Per-user SINR and spectral efficiency, and Monte-Carlo sweeps over user
//! placements and fading draws.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{build_los_matrix, mean_entry_power, normalize_from_mean_power, sample_channel_with, ChannelParams};
use crate::equalize::{equalizer_matrix, EqualizerKind};
use crate::error::{invalid, LisError, Result};
use crate::linalg::{CMatrix, CVector};
use crate::rng::{realization_rng, Stream};
use crate::scenario::{build_wall_layout, place_users_with, AntennaArray, RoomSpec, UePlacement, DEFAULT_PLANE_HEIGHT_M};

/// SINR of user `k` behind combining row `w_row` (length `M`), treating the
/// other users as noise. Unit symbol energy is assumed.
pub fn user_sinr(w_row: &CVector, h: &CMatrix, k: usize, noise_power: f64) -> Result<f64> {
    if w_row.len() != h.nrows() {
        return Err(LisError::DimensionMismatch {
            context: "user_sinr: combining row",
            expected: h.nrows(),
            actual: w_row.len(),
        });
    }
    if k >= h.ncols() {
        return Err(invalid("k", format!("user {k} out of range for {} users", h.ncols())));
    }
    let gains = h.tr_mul(w_row); // (w^T H)^T, i.e. entries sum_m w_m h_mj
    let signal = gains[k].norm_sqr();
    let interference: f64 = gains.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, g)| g.norm_sqr()).sum();
    Ok(sinr_ratio(signal, interference, noise_power * w_row.norm_squared()))
}

fn sinr_ratio(signal: f64, interference: f64, noise: f64) -> f64 {
    if signal == 0.0 {
        return 0.0;
    }
    signal / (interference + noise)
}

/// SINR of every user for a `K × M` equalization matrix.
pub fn all_user_sinr(w: &CMatrix, h: &CMatrix, noise_power: f64) -> Result<Vec<f64>> {
    if w.ncols() != h.nrows() || w.nrows() != h.ncols() {
        return Err(LisError::DimensionMismatch {
            context: "all_user_sinr: equalizer shape",
            expected: h.ncols() * h.nrows(),
            actual: w.nrows() * w.ncols(),
        });
    }
    let wh = w * h;
    Ok((0..w.nrows())
        .map(|k| {
            let row = wh.row(k);
            let signal = row[k].norm_sqr();
            let interference: f64 = row.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, g)| g.norm_sqr()).sum();
            let noise = noise_power * w.row(k).norm_squared();
            sinr_ratio(signal, interference, noise)
        })
        .collect())
}

/// Shannon rate `log2(1 + sinr)` in bits/s/Hz.
pub fn spectral_efficiency(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Linearly interpolated percentile (`pct` in `[0, 100]`) of ascending data.
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = pct.clamp(0.0, 100.0) / 100.0 * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeSample {
    pub per_user_se: Vec<f64>,
    pub realization_id: usize,
    pub placement_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeSummary {
    pub mean_user_se: f64,
    /// `(percentile, value)` pairs in ascending percentile order.
    pub percentile_se: Vec<(f64, f64)>,
    pub n_placements: usize,
    pub n_fading_draws: usize,
    /// Per-user SE values aggregated.
    pub n_samples: usize,
    /// Draws skipped because the Gramian was singular.
    pub singular_draws: usize,
}

impl SeSummary {
    pub fn from_values(mut values: Vec<f64>, percentiles: &[f64], n_placements: usize, n_fading_draws: usize, singular_draws: usize) -> Self {
        let mean = if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        values.sort_by(f64::total_cmp);
        let mut pcts = percentiles.to_vec();
        pcts.sort_by(f64::total_cmp);
        pcts.dedup();
        Self {
            mean_user_se: mean,
            percentile_se: pcts.iter().map(|&p| (p, percentile_sorted(&values, p))).collect(),
            n_placements,
            n_fading_draws,
            n_samples: values.len(),
            singular_draws,
        }
    }

    pub fn percentile(&self, pct: f64) -> Option<f64> {
        self.percentile_se.iter().find(|(p, _)| *p == pct).map(|&(_, v)| v)
    }
}

/// One deployment evaluated in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub total_antennas: usize,
    pub panel_count: usize,
}

impl SweepPoint {
    pub fn new(total_antennas: usize, panel_count: usize) -> Self {
        Self {
            label: format!("M{total_antennas}-P{panel_count}"),
            total_antennas,
            panel_count,
        }
    }

    pub fn antennas_per_panel(&self) -> usize {
        self.total_antennas / self.panel_count.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub room: RoomSpec,
    pub plane_height_m: f64,
    pub users: usize,
    pub kinds: Vec<EqualizerKind>,
    pub points: Vec<SweepPoint>,
    pub n_placements: usize,
    pub n_fading: usize,
    pub master_seed: u64,
    pub channel: ChannelParams,
    pub percentiles: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            room: RoomSpec::default(),
            plane_height_m: DEFAULT_PLANE_HEIGHT_M,
            users: 16,
            kinds: EqualizerKind::ALL.to_vec(),
            points: Vec::new(),
            n_placements: 20,
            n_fading: 100,
            master_seed: 1,
            channel: ChannelParams::default(),
            percentiles: vec![5.0, 50.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: SweepPoint,
    pub antennas_per_panel: usize,
    pub summaries: BTreeMap<EqualizerKind, SeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Common channel amplitude scale applied to every point.
    pub beta: f64,
    pub points: Vec<PointResult>,
}

/// Per-user SE of one channel draw for each requested kind. A singular
/// Gramian yields `None` for that kind.
pub fn evaluate_draw(h: &CMatrix, noise_power: f64, kinds: &[EqualizerKind]) -> Result<Vec<Option<Vec<f64>>>> {
    kinds
        .iter()
        .map(|&kind| match equalizer_matrix(kind, h, noise_power) {
            Ok(w) => Ok(Some(all_user_sinr(&w, h, noise_power)?.into_iter().map(spectral_efficiency).collect())),
            Err(LisError::SingularGramian { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

fn point_error(label: &str, e: LisError) -> LisError {
    match e {
        LisError::Layout(msg) => LisError::Layout(format!("{label}: {msg}")),
        other => other,
    }
}

/// Monte-Carlo spectral-efficiency sweep.
///
/// Placement `i` is drawn from seed `master + i` and reused by every point;
/// fading draw `f` of placement `i` uses index `i * n_fading + f`. One scale β
/// is fixed over all points and placements before any SE is evaluated.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.channel.validate()?;
    if spec.points.is_empty() {
        return Err(invalid("points", "sweep needs at least one configuration"));
    }
    if spec.n_placements == 0 || spec.n_fading == 0 {
        return Err(invalid("n_placements, n_fading", "must be at least 1"));
    }
    if spec.kinds.is_empty() {
        return Err(invalid("kinds", "at least one equalizer kind is required"));
    }
    let wavelength = spec.room.wavelength_m();

    let arrays = spec
        .points
        .iter()
        .map(|pt| {
            build_wall_layout(&spec.room, pt.total_antennas, pt.panel_count, spec.plane_height_m)
                .map_err(|e| point_error(&pt.label, e))
        })
        .collect::<Result<Vec<AntennaArray>>>()?;

    let placements = (0..spec.n_placements)
        .map(|i| {
            let mut rng = realization_rng(spec.master_seed, Stream::Placement, i as u64);
            place_users_with(&spec.room, spec.users, spec.plane_height_m, &mut rng)
        })
        .collect::<Result<Vec<UePlacement>>>()?;

    // Normalization pass over the whole compared set.
    let powers = arrays
        .par_iter()
        .map(|array| {
            placements
                .iter()
                .map(|ues| build_los_matrix(array, ues, wavelength).map(|h| mean_entry_power(&h)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let count = (arrays.len() * placements.len()) as f64;
    let mean_power = powers.iter().flatten().sum::<f64>() / count;
    let beta = normalize_from_mean_power(mean_power, &spec.channel)?;

    let mut points = Vec::with_capacity(arrays.len());
    for (pt, array) in spec.points.iter().zip(&arrays) {
        let per_placement = placements
            .par_iter()
            .enumerate()
            .map(|(i, ues)| evaluate_placement(spec, array, ues, i, beta, wavelength))
            .collect::<Result<Vec<PlacementOutcome>>>()?;

        let mut summaries = BTreeMap::new();
        for (ki, &kind) in spec.kinds.iter().enumerate() {
            let mut values = Vec::new();
            let mut singular = 0;
            for outcome in &per_placement {
                values.extend_from_slice(&outcome.values[ki]);
                singular += outcome.singular[ki];
            }
            if singular > 0 {
                warn!("{}: {kind} skipped {singular} singular draws", pt.label);
            }
            summaries.insert(
                kind,
                SeSummary::from_values(values, &spec.percentiles, spec.n_placements, spec.n_fading, singular),
            );
        }
        points.push(PointResult {
            point: pt.clone(),
            antennas_per_panel: array.antennas_per_panel,
            summaries,
        });
    }
    Ok(SweepResult { beta, points })
}

struct PlacementOutcome {
    values: Vec<Vec<f64>>,
    singular: Vec<usize>,
}

fn evaluate_placement(
    spec: &SweepSpec,
    array: &AntennaArray,
    ues: &UePlacement,
    placement_id: usize,
    beta: f64,
    wavelength: f64,
) -> Result<PlacementOutcome> {
    let los = build_los_matrix(array, ues, wavelength)?;
    let mut out = PlacementOutcome {
        values: vec![Vec::with_capacity(spec.n_fading * spec.users); spec.kinds.len()],
        singular: vec![0; spec.kinds.len()],
    };
    for f in 0..spec.n_fading {
        let index = (placement_id * spec.n_fading + f) as u64;
        let mut rng = realization_rng(spec.master_seed, Stream::Fading, index);
        let draw = sample_channel_with(&los, &spec.channel, &mut rng).scaled(beta);
        for (ki, se) in evaluate_draw(&draw.h, spec.channel.noise_power, &spec.kinds)?.into_iter().enumerate() {
            match se {
                Some(v) => out.values[ki].extend(v),
                None => out.singular[ki] += 1,
            }
        }
    }
    Ok(out)
}
