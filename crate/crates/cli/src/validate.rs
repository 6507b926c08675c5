//! Cross-module self-checks behind `lis-sim validate`.

use std::fmt::Write as _;

use anyhow::Result;
use lis_core::chain::{fronthaul_latency, run_chain, ChainTopology};
use lis_core::channel::complex_gaussian;
use lis_core::equalize::{centralized_equalize, equalizer_matrix, split_panels, EqualizerKind};
use lis_core::latency::{cpu_latency, lpu_latency, wait_latency, CycleOp, FrameSpec};
use lis_core::linalg::{rel_diff_vec, CMatrix, CVector};
use lis_core::metrics::{all_user_sinr, run_sweep, SweepPoint, SweepSpec};
use lis_core::rng::{realization_rng, Stream};
use lis_core::LisError;
use num_complex::Complex64;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::config::{Experiment, ExperimentConfig};
use crate::experiments::{ExperimentOutput, OutputFile};

/// Measured cycle counts at N = 16, as `(op, K = 16, K = 128)`.
const PUBLISHED_CYCLES: [(CycleOp, f64, f64); 5] = [
    (CycleOp::ChanEst, 83.0, 531.0),
    (CycleOp::Gramian, 946.0, 58_000.0),
    (CycleOp::GramianInv, 1_817.0, 890_000.0),
    (CycleOp::MrcCombine, 81.0, 460.0),
    (CycleOp::ZfMultiply, 81.0, 3_300.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

fn random_matrix(rng: &mut impl Rng, m: usize, k: usize) -> CMatrix {
    CMatrix::from_fn(m, k, |_, _| complex_gaussian(rng, 1.0))
}

fn random_vector(rng: &mut impl Rng, m: usize) -> CVector {
    CVector::from_fn(m, |_, _| complex_gaussian(rng, 1.0))
}

/// Decentralized chain output against the centralized equalizer on random
/// instances with `M ≤ 128`, `K ≤ 16`, `P | M`.
pub fn check_equivalence(instances: usize, seed: u64) -> Check {
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut errors = Vec::new();
    for i in 0..instances {
        let mut rng = realization_rng(seed, Stream::Fuzz, i as u64);
        let m = rng.random_range(8..=128usize);
        let k = rng.random_range(1..=(m / 2).min(16));
        let divisors: Vec<usize> = (1..=m).filter(|p| m % p == 0).collect();
        let p = *divisors.choose(&mut rng).expect("1 divides m");
        let n0 = rng.random_range(0.01..1.0);
        let h = random_matrix(&mut rng, m, k);
        let y = random_vector(&mut rng, m);
        let parts = match split_panels(&h, &y, p) {
            Ok(parts) => parts,
            Err(e) => {
                errors.push(e.to_string());
                continue;
            }
        };
        for kind in EqualizerKind::ALL {
            let outcome = run_chain(&ChainTopology::linear(p), &parts, kind, n0).and_then(|dec| {
                centralized_equalize(&h, &y, kind, n0).map(|central| rel_diff_vec(&dec.equalized, &central))
            });
            match outcome {
                Ok(rel) => {
                    worst = worst.max(rel);
                    if rel >= 1e-10 {
                        failures += 1;
                    }
                }
                Err(e) => errors.push(format!("instance {i} {kind}: {e}")),
            }
        }
    }
    Check {
        name: "central-decentral-equivalence",
        passed: failures == 0 && errors.is_empty(),
        detail: format!(
            "{instances} instances x 3 kinds, worst relative error {worst:.2e} (limit 1e-10), {failures} over limit, {} errors",
            errors.len()
        ),
    }
}

/// The fitted cycle model against the published measurements.
pub fn check_anchor_exactness(cfg: &ExperimentConfig) -> Check {
    let model = match cfg.cycle_model() {
        Ok(m) => m,
        Err(e) => {
            return Check {
                name: "cycle-anchor-exactness",
                passed: false,
                detail: format!("{e:#}"),
            }
        }
    };
    let mut mismatches = Vec::new();
    for (op, small, large) in PUBLISHED_CYCLES {
        for (k, expected) in [(16, small), (128, large)] {
            let got = model.cycles(op, 16, k);
            if got != expected {
                mismatches.push(format!("{op}@K={k}: {got} != {expected}"));
            }
        }
    }
    Check {
        name: "cycle-anchor-exactness",
        passed: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            "all ten published cycle counts reproduced exactly".into()
        } else {
            mismatches.join("; ")
        },
    }
}

pub fn check_latency_constants(cfg: &ExperimentConfig) -> Check {
    let model = match cfg.cycle_model() {
        Ok(m) => m,
        Err(e) => {
            return Check {
                name: "latency-constants",
                passed: false,
                detail: format!("{e:#}"),
            }
        }
    };
    let wait = wait_latency(&FrameSpec::default());
    let (frontend, _) = lpu_latency(&model, 16, 16, EqualizerKind::Mrc);
    let fronthaul = fronthaul_latency(&ChainTopology::linear(128));
    let cpu_mrc = cpu_latency(&model, 128, EqualizerKind::Mrc);
    let passed = wait == 133.0 && frontend == 25.0 && (fronthaul - 110.49).abs() < 1e-9 && cpu_mrc == 0.0;
    Check {
        name: "latency-constants",
        passed,
        detail: format!("wait {wait} us, front-end {frontend} us, fronthaul(P=128) {fronthaul:.2} us, cpu(MRC) {cpu_mrc} us"),
    }
}

pub fn check_chain_order(instances: usize, seed: u64) -> Check {
    let mut worst = 0.0f64;
    let mut errors = 0;
    for i in 0..instances {
        let mut rng = realization_rng(seed, Stream::Fuzz, 1_000_000 + i as u64);
        let p = 8;
        let (m, k) = (64, 6);
        let h = random_matrix(&mut rng, m, k);
        let y = random_vector(&mut rng, m);
        let parts = split_panels(&h, &y, p).expect("8 divides 64");
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut rng);
        for kind in EqualizerKind::ALL {
            let base = run_chain(&ChainTopology::linear(p), &parts, kind, 0.2);
            let perm = run_chain(&ChainTopology::linear(p).with_order(order.clone()), &parts, kind, 0.2);
            match (base, perm) {
                (Ok(a), Ok(b)) => worst = worst.max(rel_diff_vec(&b.equalized, &a.equalized)),
                _ => errors += 1,
            }
        }
    }
    Check {
        name: "chain-order-invariance",
        passed: worst <= 1e-12 && errors == 0,
        detail: format!("{instances} random permutations, worst relative change {worst:.2e} (limit 1e-12)"),
    }
}

/// Measures signal, interference and noise power at the equalizer output by
/// transmitting random QPSK symbols through the channel.
pub fn monte_carlo_sinr(w: &CMatrix, h: &CMatrix, noise_power: f64, draws: usize, rng: &mut impl Rng) -> Vec<f64> {
    let k = h.ncols();
    let m = h.nrows();
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let mut sig = vec![0.0; k];
    let mut other = vec![0.0; k];
    let mut s = vec![Complex64::default(); k];
    let mut noise = vec![Complex64::default(); m];
    for _ in 0..draws {
        for v in s.iter_mut() {
            *v = Complex64::new(if rng.random() { a } else { -a }, if rng.random() { a } else { -a });
        }
        for v in noise.iter_mut() {
            *v = complex_gaussian(rng, noise_power);
        }
        for u in 0..k {
            let mut desired = Complex64::default();
            let mut rest = Complex64::default();
            for r in 0..m {
                let wr = w[(u, r)];
                for j in 0..k {
                    let term = wr * h[(r, j)] * s[j];
                    if j == u {
                        desired += term;
                    } else {
                        rest += term;
                    }
                }
                rest += wr * noise[r];
            }
            sig[u] += desired.norm_sqr();
            other[u] += rest.norm_sqr();
        }
    }
    sig.iter().zip(&other).map(|(s, o)| s / o).collect()
}

pub fn check_sinr_oracle(instances: usize, draws: usize, seed: u64) -> Check {
    let mut worst = 0.0f64;
    let mut errors = 0;
    for i in 0..instances {
        let mut rng = realization_rng(seed, Stream::Fuzz, 2_000_000 + i as u64);
        let m = rng.random_range(4..=8usize);
        let k = rng.random_range(2..=3usize);
        let n0 = rng.random_range(0.1..1.0);
        let h = random_matrix(&mut rng, m, k);
        let kind = EqualizerKind::ALL[i % 3];
        let Ok(w) = equalizer_matrix(kind, &h, n0) else {
            errors += 1;
            continue;
        };
        let analytic = all_user_sinr(&w, &h, n0).unwrap_or_default();
        let measured = monte_carlo_sinr(&w, &h, n0, draws, &mut rng);
        for (a, b) in analytic.iter().zip(&measured) {
            worst = worst.max((a - b).abs() / a);
        }
    }
    Check {
        name: "sinr-monte-carlo-oracle",
        passed: worst < 0.02 && errors == 0,
        detail: format!("{instances} instances, {draws} symbol draws each, worst relative gap {:.3}% (limit 2%)", 100.0 * worst),
    }
}

/// ZF with more users than antennas must surface singular Gramians.
pub fn check_rank_deficiency(seed: u64) -> Check {
    let mut rng = realization_rng(seed, Stream::Fuzz, 3_000_000);
    let h = random_matrix(&mut rng, 4, 8);
    let direct = matches!(equalizer_matrix(EqualizerKind::Zf, &h, 0.0), Err(LisError::SingularGramian { .. }));
    let spec = SweepSpec {
        users: 8,
        kinds: vec![EqualizerKind::Zf],
        points: vec![SweepPoint::new(4, 1)],
        n_placements: 1,
        n_fading: 3,
        master_seed: seed,
        ..Default::default()
    };
    let counted = run_sweep(&spec)
        .map(|r| r.points[0].summaries[&EqualizerKind::Zf].singular_draws)
        .unwrap_or(0);
    Check {
        name: "rank-deficient-zf",
        passed: direct && counted == 3,
        detail: format!("K=8 > M=4: singular error raised = {direct}, singular draws counted in sweep = {counted} of 3"),
    }
}

pub fn run_validate(cfg: &ExperimentConfig) -> Result<(ValidationReport, ExperimentOutput)> {
    cfg.validate(Experiment::Validate)?;
    let seed = cfg.monte_carlo.master_seed;
    let v = &cfg.validate;
    let report = ValidationReport {
        checks: vec![
            check_equivalence(v.equivalence_instances, seed),
            check_anchor_exactness(cfg),
            check_latency_constants(cfg),
            check_chain_order(20, seed),
            check_sinr_oracle(v.sinr_instances, v.sinr_draws, seed),
            check_rank_deficiency(seed),
        ],
    };
    let text = report.render();
    let output = ExperimentOutput {
        files: vec![OutputFile {
            name: "validation_report.txt".into(),
            bytes: text.clone().into_bytes(),
        }],
        summary: text,
    };
    Ok((report, output))
}
