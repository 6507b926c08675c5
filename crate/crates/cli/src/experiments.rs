//! The canonical experiments. Each one returns its output files in memory;
//! [`write_outputs`] puts them on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use lis_core::chain::{run_chain, ChainTopology};
use lis_core::channel::{build_los_matrix, normalize_scenario_set, receive_vector_with, sample_channel_with};
use lis_core::equalize::{centralized_equalize, split_panels, EqualizerKind};
use lis_core::export::{
    write_geometry_csv, write_hops_csv, write_latency_csv, write_matrix_bin, write_matrix_csv, write_summary_csv, LatencyRow,
};
use lis_core::latency::{total_latency, CycleModel, LatencyBreakdown};
use lis_core::linalg::{rel_diff_vec, CVector};
use lis_core::metrics::{run_sweep, SweepPoint, SweepResult, SweepSpec};
use lis_core::rng::{realization_rng, Stream};
use lis_core::scenario::{build_wall_layout, place_users_with};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            bytes,
        }
    }
}

/// Files produced by one experiment, including the resolved-config echo.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub files: Vec<OutputFile>,
    /// Short human-readable summary for the terminal.
    pub summary: String,
}

impl ExperimentOutput {
    pub fn file(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.file(name).and_then(|f| std::str::from_utf8(&f.bytes).ok())
    }
}

pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> Result<()> {
    for f in &output.files {
        let path = dir.join(&f.name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, &f.bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct FitEcho {
    complexity: &'static str,
    intercept_cycles: f64,
    slope_cycles_per_unit: f64,
}

fn cycle_model_echo(model: &CycleModel) -> BTreeMap<String, FitEcho> {
    model
        .fits
        .iter()
        .map(|(op, fit)| {
            (
                op.to_string(),
                FitEcho {
                    complexity: op.complexity_label(),
                    intercept_cycles: fit.intercept(),
                    slope_cycles_per_unit: fit.slope(),
                },
            )
        })
        .collect()
}

fn resolved_config(experiment: Experiment, cfg: &ExperimentConfig, model: &CycleModel, extra: Value) -> Result<OutputFile> {
    let mut doc = json!({
        "experiment": experiment.as_str(),
        "config": cfg,
        "cycle_model": cycle_model_echo(model),
    });
    if let (Value::Object(d), Value::Object(e)) = (&mut doc, extra) {
        d.extend(e);
    }
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(OutputFile::new("resolved_config.json", bytes))
}

fn topology(cfg: &ExperimentConfig, panels: usize) -> ChainTopology {
    ChainTopology {
        per_hop_latency_us: cfg.latency.per_hop_us,
        inter_panel_distance_m: cfg.latency.inter_panel_distance_m,
        ..ChainTopology::linear(panels)
    }
}

/// Latency for `(n, k, p, kind)` under the configured frame and fronthaul.
pub fn latency_for(cfg: &ExperimentConfig, model: &CycleModel, n: usize, k: usize, p: usize, kind: EqualizerKind) -> Result<LatencyBreakdown> {
    Ok(total_latency(
        &cfg.latency.frame,
        model,
        n,
        k,
        p,
        kind,
        &topology(cfg, p),
        cfg.latency.air_distance_m,
    )?)
}

pub fn run_latency_breakdown(cfg: &ExperimentConfig) -> Result<(Vec<LatencyRow>, ExperimentOutput)> {
    cfg.validate(Experiment::LatencyBreakdown)?;
    let model = cfg.cycle_model()?;
    let n = cfg.latency.breakdown_antennas_per_panel;
    let p = cfg.latency.breakdown_panels;
    let mut rows = Vec::new();
    for &k in &cfg.latency.breakdown_users {
        for kind in EqualizerKind::ALL {
            rows.push(LatencyRow {
                kind,
                n,
                k,
                p,
                breakdown: latency_for(cfg, &model, n, k, p, kind)?,
            });
        }
    }

    let mut relative = String::from("kind,N,K,P,wait_share,frontend_share,local_share,fronthaul_share,cpu_share,propagation_share\n");
    let mut summary = String::new();
    for r in &rows {
        let s = r.breakdown.shares();
        relative.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.kind, r.n, r.k, r.p, s[0], s[1], s[2], s[3], s[4], s[5]
        ));
        summary.push_str(&format!(
            "{:<5} K={:<4} total {:>9.2} us  wait {:>5.1}%  lpu {:>5.1}%  fronthaul {:>5.1}%  cpu {:>5.1}%\n",
            r.kind.as_str(),
            r.k,
            r.breakdown.total_us,
            100.0 * s[0],
            100.0 * (s[1] + s[2]),
            100.0 * s[3],
            100.0 * s[4]
        ));
    }

    let files = vec![
        OutputFile::new("latency_breakdown.csv", csv_bytes(|b| write_latency_csv(b, &rows))?),
        OutputFile::new("latency_relative.csv", relative.into_bytes()),
        resolved_config(
            Experiment::LatencyBreakdown,
            cfg,
            &model,
            json!({ "extrapolated_n": model.is_extrapolated(n) }),
        )?,
    ];
    Ok((rows, ExperimentOutput { files, summary }))
}

fn sweep_spec(cfg: &ExperimentConfig, points: Vec<SweepPoint>) -> SweepSpec {
    SweepSpec {
        room: cfg.scenario.room,
        plane_height_m: cfg.scenario.plane_height_m,
        users: cfg.scenario.users,
        kinds: cfg.scenario.kinds.clone(),
        points,
        n_placements: cfg.monte_carlo.placements,
        n_fading: cfg.monte_carlo.fading_draws,
        master_seed: cfg.monte_carlo.master_seed,
        channel: cfg.channel_params(),
        percentiles: cfg.monte_carlo.percentiles.clone(),
    }
}

/// Per-point latency rows: `config,P,N,M,K,kind,total_latency_us,cpu_us,extrapolated`.
fn point_latency_csv(cfg: &ExperimentConfig, model: &CycleModel, result: &SweepResult) -> Result<Vec<u8>> {
    let mut out = String::from("config,P,N,M,K,kind,total_latency_us,cpu_us,extrapolated\n");
    let k = cfg.scenario.users;
    for pr in &result.points {
        for kind in pr.summaries.keys() {
            let n = pr.antennas_per_panel;
            let b = latency_for(cfg, model, n, k, pr.point.panel_count, *kind)?;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                pr.point.label,
                pr.point.panel_count,
                n,
                pr.point.total_antennas,
                k,
                kind,
                b.total_us,
                b.cpu_us,
                model.is_extrapolated(n)
            ));
        }
    }
    Ok(out.into_bytes())
}

fn sweep_summary_text(result: &SweepResult) -> String {
    let mut s = format!("common channel scale beta = {:.6e}\n", result.beta);
    for pr in &result.points {
        for (kind, sum) in &pr.summaries {
            s.push_str(&format!(
                "{:<10} {:<5} mean {:>7.4}  p5 {:>7.4} bit/s/Hz  ({} samples, {} singular)\n",
                pr.point.label,
                kind.as_str(),
                sum.mean_user_se,
                sum.percentile(5.0).unwrap_or(f64::NAN),
                sum.n_samples,
                sum.singular_draws
            ));
        }
    }
    s
}

fn geometry_files(cfg: &ExperimentConfig, points: &[SweepPoint]) -> Result<Vec<OutputFile>> {
    points
        .iter()
        .map(|pt| {
            let array = build_wall_layout(&cfg.scenario.room, pt.total_antennas, pt.panel_count, cfg.scenario.plane_height_m)?;
            Ok(OutputFile::new(
                format!("geometry/{}.csv", pt.label),
                csv_bytes(|b| write_geometry_csv(b, &array))?,
            ))
        })
        .collect()
}

pub fn run_sweep_fixed_m(cfg: &ExperimentConfig) -> Result<(SweepResult, ExperimentOutput)> {
    cfg.validate(Experiment::SweepFixedM)?;
    let model = cfg.cycle_model()?;
    let m = cfg.sweep_fixed_m.total_antennas;
    let points: Vec<SweepPoint> = cfg.sweep_fixed_m.panel_counts.iter().map(|&p| SweepPoint::new(m, p)).collect();
    let result = run_sweep(&sweep_spec(cfg, points.clone()))?;

    let mut files = vec![
        OutputFile::new("summary.csv", csv_bytes(|b| write_summary_csv(b, cfg.scenario.users, &result.points))?),
        OutputFile::new("point_latency.csv", point_latency_csv(cfg, &model, &result)?),
    ];
    files.extend(geometry_files(cfg, &points)?);
    files.push(resolved_config(Experiment::SweepFixedM, cfg, &model, json!({ "beta": result.beta }))?);
    let summary = sweep_summary_text(&result);
    Ok((result, ExperimentOutput { files, summary }))
}

/// Least-squares slope and R² of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

pub fn run_sweep_fixed_n(cfg: &ExperimentConfig) -> Result<(SweepResult, ExperimentOutput)> {
    cfg.validate(Experiment::SweepFixedN)?;
    let model = cfg.cycle_model()?;
    let n = cfg.sweep_fixed_n.antennas_per_panel;
    let points: Vec<SweepPoint> = cfg.sweep_fixed_n.panel_counts.iter().map(|&p| SweepPoint::new(n * p, p)).collect();
    let result = run_sweep(&sweep_spec(cfg, points.clone()))?;

    let mut user_counts = vec![cfg.scenario.users];
    user_counts.extend(&cfg.latency.breakdown_users);
    user_counts.sort_unstable();
    user_counts.dedup();
    let mut ratio = String::from("K,P,N,zf_latency_us,mrc_latency_4p_us,ratio\n");
    for &k in &user_counts {
        for &p in &cfg.sweep_fixed_n.panel_counts {
            let zf = latency_for(cfg, &model, n, k, p, EqualizerKind::Zf)?.total_us;
            let mrc = latency_for(cfg, &model, n, k, 4 * p, EqualizerKind::Mrc)?.total_us;
            ratio.push_str(&format!("{k},{p},{n},{zf},{mrc},{}\n", zf / mrc));
        }
    }

    let log_p: Vec<f64> = result.points.iter().map(|pr| (pr.point.panel_count as f64).log2()).collect();
    let mut trend = BTreeMap::new();
    for kind in &cfg.scenario.kinds {
        let means: Vec<f64> = result.points.iter().map(|pr| pr.summaries[kind].mean_user_se).collect();
        if means.len() >= 2 {
            let (slope, r2) = linear_fit(&log_p, &means);
            trend.insert(kind.to_string(), json!({ "se_per_doubling": slope, "r_squared": r2 }));
        }
    }

    let mut files = vec![
        OutputFile::new("summary.csv", csv_bytes(|b| write_summary_csv(b, cfg.scenario.users, &result.points))?),
        OutputFile::new("point_latency.csv", point_latency_csv(cfg, &model, &result)?),
        OutputFile::new("latency_ratio.csv", ratio.into_bytes()),
    ];
    files.extend(geometry_files(cfg, &points)?);
    files.push(resolved_config(
        Experiment::SweepFixedN,
        cfg,
        &model,
        json!({ "beta": result.beta, "log2_p_trend": trend }),
    )?);
    let mut summary = sweep_summary_text(&result);
    for (kind, t) in &trend {
        summary.push_str(&format!("{kind}: {:.4} bit/s/Hz per doubling of P (R^2 {:.4})\n", t["se_per_doubling"], t["r_squared"]));
    }
    Ok((result, ExperimentOutput { files, summary }))
}

/// What a chain trace computed, besides its files.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub hops: usize,
    pub fronthaul_us: f64,
    pub relative_error_vs_central: f64,
}

pub fn run_chain_trace(cfg: &ExperimentConfig) -> Result<(ChainTrace, ExperimentOutput)> {
    cfg.validate(Experiment::ChainTrace)?;
    let model = cfg.cycle_model()?;
    let tc = &cfg.chain_trace;
    let seed = cfg.monte_carlo.master_seed;
    let params = cfg.channel_params();
    let k = cfg.scenario.users;

    let array = build_wall_layout(&cfg.scenario.room, tc.panels * tc.antennas_per_panel, tc.panels, cfg.scenario.plane_height_m)?;
    let ues = place_users_with(&cfg.scenario.room, k, cfg.scenario.plane_height_m, &mut realization_rng(seed, Stream::Placement, 0))?;
    let los = build_los_matrix(&array, &ues, cfg.scenario.room.wavelength_m())?;
    let beta = normalize_scenario_set(std::slice::from_ref(&los), &params)?;
    let draw = sample_channel_with(&los, &params, &mut realization_rng(seed, Stream::Fading, 0)).scaled(beta);

    let mut sym_rng = realization_rng(seed, Stream::Symbols, 0);
    let qpsk = std::f64::consts::FRAC_1_SQRT_2;
    let symbols = CVector::from_fn(k, |_, _| {
        let re = if sym_rng.random::<bool>() { qpsk } else { -qpsk };
        let im = if sym_rng.random::<bool>() { qpsk } else { -qpsk };
        Complex64::new(re, im)
    });
    let y = receive_vector_with(&draw.h, &symbols, params.noise_power, &mut realization_rng(seed, Stream::Noise, 0))?;

    let mut topo = topology(cfg, tc.panels);
    if let Some(order) = &tc.order {
        topo.panel_order = order.clone();
    }
    let inputs = split_panels(&draw.h, &y, tc.panels)?;
    let outcome = run_chain(&topo, &inputs, tc.kind, params.noise_power)?;
    let central = centralized_equalize(&draw.h, &y, tc.kind, params.noise_power)?;
    let rel = rel_diff_vec(&outcome.equalized, &central);

    let mut eq = String::from("user,sent_re,sent_im,chain_re,chain_im,central_re,central_im\n");
    for u in 0..k {
        let (s, a, c) = (symbols[u], outcome.equalized[u], central[u]);
        eq.push_str(&format!("{u},{},{},{},{},{},{}\n", s.re, s.im, a.re, a.im, c.re, c.im));
    }

    let fronthaul = lis_core::chain::fronthaul_latency(&topo);
    let trace = ChainTrace {
        hops: outcome.hops.len(),
        fronthaul_us: fronthaul,
        relative_error_vs_central: rel,
    };
    let files = vec![
        OutputFile::new("hops.csv", csv_bytes(|b| write_hops_csv(b, &outcome.hops))?),
        OutputFile::new("equalized.csv", eq.into_bytes()),
        OutputFile::new("channel.csv", csv_bytes(|b| write_matrix_csv(b, &draw.h))?),
        OutputFile::new("channel.bin", csv_bytes(|b| write_matrix_bin(b, &draw.h))?),
        OutputFile::new("geometry.csv", csv_bytes(|b| write_geometry_csv(b, &array))?),
        resolved_config(
            Experiment::ChainTrace,
            cfg,
            &model,
            json!({ "beta": beta, "relative_error_vs_central": rel, "fronthaul_us": fronthaul }),
        )?,
    ];
    let summary = format!(
        "{} over {} panels: {} hops, fronthaul {:.2} us, chain vs central relative error {:.2e}\n",
        tc.kind,
        tc.panels,
        trace.hops,
        fronthaul,
        rel
    );
    Ok((trace, ExperimentOutput { files, summary }))
}
