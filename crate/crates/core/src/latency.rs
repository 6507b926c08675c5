//! Uplink latency model: frame wait, local panel processing, fronthaul and
//! central processing.
//!
//! Processing times come from cycle counts measured on a vector processor at
//! `N = 16` antennas and `K ∈ {16, 128}` users. Each operation is modeled as
//! `a + b·c(N, K)` with `c` the operation's complexity order, fitted through
//! its two measurements. Predictions at `N ≠ 16` are extrapolations.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::{fronthaul_latency, ChainTopology};
use crate::equalize::EqualizerKind;
use crate::error::{invalid, LisError, Result};

/// Digital front-end plus FFT latency of a panel.
pub const FRONTEND_LATENCY_US: f64 = 25.0;

/// Over-the-air propagation delay.
pub const AIR_DELAY_US_PER_KM: f64 = 3.3;

pub const DEFAULT_CLOCK_HZ: f64 = 150e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleOp {
    /// Least-squares channel estimate from pilots.
    ChanEst,
    /// Local Gramian `H^H H`.
    Gramian,
    /// Gramian inversion.
    GramianInv,
    /// Local MRC combining `H^H y`.
    MrcCombine,
    /// `G^{-1} z` multiply.
    ZfMultiply,
}

impl CycleOp {
    pub const ALL: [CycleOp; 5] = [
        CycleOp::ChanEst,
        CycleOp::Gramian,
        CycleOp::GramianInv,
        CycleOp::MrcCombine,
        CycleOp::ZfMultiply,
    ];

    /// Complexity order evaluated at `(n, k)`.
    pub fn complexity(self, n: usize, k: usize) -> f64 {
        let (n, k) = (n as f64, k as f64);
        match self {
            CycleOp::ChanEst | CycleOp::MrcCombine => k * n,
            CycleOp::Gramian => k * k * n,
            CycleOp::GramianInv => k * k * k,
            CycleOp::ZfMultiply => k * k,
        }
    }

    pub fn complexity_label(self) -> &'static str {
        match self {
            CycleOp::ChanEst | CycleOp::MrcCombine => "KN",
            CycleOp::Gramian => "K^2 N",
            CycleOp::GramianInv => "K^3",
            CycleOp::ZfMultiply => "K^2",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CycleOp::ChanEst => "chan_est",
            CycleOp::Gramian => "gramian",
            CycleOp::GramianInv => "gramian_inv",
            CycleOp::MrcCombine => "mrc_combine",
            CycleOp::ZfMultiply => "zf_multiply",
        }
    }
}

impl fmt::Display for CycleOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One measured cycle count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleAnchor {
    pub op: CycleOp,
    pub n: usize,
    pub k: usize,
    pub cycles: f64,
}

/// Published measurements at `N = 16`, `K ∈ {16, 128}`.
pub fn measured_anchors() -> Vec<CycleAnchor> {
    let rows = [
        (CycleOp::ChanEst, 83.0, 531.0),
        (CycleOp::Gramian, 946.0, 58_000.0),
        (CycleOp::GramianInv, 1_817.0, 890_000.0),
        (CycleOp::MrcCombine, 81.0, 460.0),
        (CycleOp::ZfMultiply, 81.0, 3_300.0),
    ];
    rows.iter()
        .flat_map(|&(op, small, large)| {
            [
                CycleAnchor { op, n: 16, k: 16, cycles: small },
                CycleAnchor { op, n: 16, k: 128, cycles: large },
            ]
        })
        .collect()
}

/// Affine cycle predictor through two anchor points.
///
/// Evaluated in two-point form so both anchors are reproduced bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpFit {
    pub op: CycleOp,
    pub anchor_lo: CycleAnchor,
    pub anchor_hi: CycleAnchor,
}

impl OpFit {
    fn c_lo(&self) -> f64 {
        self.op.complexity(self.anchor_lo.n, self.anchor_lo.k)
    }

    fn c_hi(&self) -> f64 {
        self.op.complexity(self.anchor_hi.n, self.anchor_hi.k)
    }

    /// Cycles per complexity unit.
    pub fn slope(&self) -> f64 {
        (self.anchor_hi.cycles - self.anchor_lo.cycles) / (self.c_hi() - self.c_lo())
    }

    /// Fixed cycles.
    pub fn intercept(&self) -> f64 {
        self.anchor_lo.cycles - self.slope() * self.c_lo()
    }

    pub fn cycles(&self, n: usize, k: usize) -> f64 {
        let c = self.op.complexity(n, k);
        let (c_lo, c_hi) = (self.c_lo(), self.c_hi());
        let (y_lo, y_hi) = (self.anchor_lo.cycles, self.anchor_hi.cycles);
        y_lo + (y_hi - y_lo) * ((c - c_lo) / (c_hi - c_lo))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleModel {
    pub fits: BTreeMap<CycleOp, OpFit>,
    pub clock_hz: f64,
}

/// Fits one affine predictor per operation; every operation needs exactly two
/// anchors at distinct complexity values and a positive slope.
pub fn fit_cycle_model(anchors: &[CycleAnchor], clock_hz: f64) -> Result<CycleModel> {
    if !(clock_hz > 0.0) {
        return Err(invalid("clock_hz", "must be positive"));
    }
    let mut grouped: BTreeMap<CycleOp, Vec<CycleAnchor>> = BTreeMap::new();
    for a in anchors {
        grouped.entry(a.op).or_default().push(*a);
    }
    let mut fits = BTreeMap::new();
    for op in CycleOp::ALL {
        let reject = |reason: String| LisError::CycleFit {
            op: op.to_string(),
            reason,
        };
        let pts = grouped.remove(&op).unwrap_or_default();
        if pts.len() != 2 {
            return Err(reject(format!("expected exactly two anchors, got {}", pts.len())));
        }
        let (mut lo, mut hi) = (pts[0], pts[1]);
        if op.complexity(lo.n, lo.k) > op.complexity(hi.n, hi.k) {
            std::mem::swap(&mut lo, &mut hi);
        }
        if op.complexity(lo.n, lo.k) == op.complexity(hi.n, hi.k) {
            return Err(reject("anchors have equal complexity".into()));
        }
        let fit = OpFit {
            op,
            anchor_lo: lo,
            anchor_hi: hi,
        };
        if !(fit.slope() > 0.0) {
            return Err(reject(format!("fitted slope {} is not positive", fit.slope())));
        }
        fits.insert(op, fit);
    }
    Ok(CycleModel { fits, clock_hz })
}

impl CycleModel {
    /// The model fitted to the published measurements at 150 MHz.
    pub fn measured() -> Self {
        fit_cycle_model(&measured_anchors(), DEFAULT_CLOCK_HZ).expect("published anchors are valid")
    }

    pub fn fit(&self, op: CycleOp) -> &OpFit {
        &self.fits[&op]
    }

    pub fn cycles(&self, op: CycleOp, n: usize, k: usize) -> f64 {
        self.fit(op).cycles(n, k)
    }

    pub fn cycles_to_us(&self, cycles: f64) -> f64 {
        cycles / self.clock_hz * 1e6
    }

    /// True when `n` lies outside the antenna counts the anchors were measured at.
    pub fn is_extrapolated(&self, n: usize) -> bool {
        !self
            .fits
            .values()
            .any(|f| f.anchor_lo.n == n || f.anchor_hi.n == n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSpec {
    pub slots_per_frame: usize,
    /// OFDM symbol duration including cyclic prefix.
    pub ofdm_symbol_us: f64,
    pub subcarrier_spacing_hz: f64,
    pub worst_case_wait_symbols: usize,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            slots_per_frame: 7,
            ofdm_symbol_us: 19.0,
            subcarrier_spacing_hz: 60e3,
            worst_case_wait_symbols: 7,
        }
    }
}

/// Worst-case wait for the next uplink data slot.
pub fn wait_latency(frame: &FrameSpec) -> f64 {
    frame.worst_case_wait_symbols as f64 * frame.ofdm_symbol_us
}

/// `(front-end, local MIMO processing)` latency of one panel in microseconds.
///
/// Channel estimation, the local Gramian (ZF/MMSE only) and MRC combining run
/// back to back.
pub fn lpu_latency(model: &CycleModel, n: usize, k: usize, kind: EqualizerKind) -> (f64, f64) {
    let mut cycles = model.cycles(CycleOp::ChanEst, n, k);
    if kind.needs_gramian() {
        cycles += model.cycles(CycleOp::Gramian, n, k);
    }
    cycles += model.cycles(CycleOp::MrcCombine, n, k);
    (FRONTEND_LATENCY_US, model.cycles_to_us(cycles))
}

/// Central processing at the last panel. MMSE's diagonal loading is free.
pub fn cpu_latency(model: &CycleModel, k: usize, kind: EqualizerKind) -> f64 {
    match kind {
        EqualizerKind::Mrc => 0.0,
        EqualizerKind::Zf | EqualizerKind::Mmse => {
            // Neither op depends on N; any value works.
            let n = 1;
            model.cycles_to_us(model.cycles(CycleOp::GramianInv, n, k) + model.cycles(CycleOp::ZfMultiply, n, k))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub wait_us: f64,
    pub lpu_frontend_us: f64,
    pub lpu_local_us: f64,
    pub fronthaul_us: f64,
    pub cpu_us: f64,
    /// Over-the-air delay; zero unless a distance is given.
    pub propagation_us: f64,
    pub total_us: f64,
}

impl LatencyBreakdown {
    /// Component shares of the total, in the order wait, front-end, local,
    /// fronthaul, cpu, propagation.
    pub fn shares(&self) -> [f64; 6] {
        let t = self.total_us;
        [
            self.wait_us / t,
            self.lpu_frontend_us / t,
            self.lpu_local_us / t,
            self.fronthaul_us / t,
            self.cpu_us / t,
            self.propagation_us / t,
        ]
    }

    pub fn lpu_us(&self) -> f64 {
        self.lpu_frontend_us + self.lpu_local_us
    }
}

/// End-to-end latency until the first subcarrier is detected.
#[allow(clippy::too_many_arguments)]
pub fn total_latency(
    frame: &FrameSpec,
    model: &CycleModel,
    n: usize,
    k: usize,
    p: usize,
    kind: EqualizerKind,
    topology: &ChainTopology,
    air_distance_m: Option<f64>,
) -> Result<LatencyBreakdown> {
    if n == 0 || k == 0 {
        return Err(invalid("n, k", "must be at least 1"));
    }
    if topology.len() != p {
        return Err(LisError::DimensionMismatch {
            context: "total_latency: chain length vs panel count",
            expected: p,
            actual: topology.len(),
        });
    }
    topology.validate()?;
    let propagation_us = match air_distance_m {
        Some(d) if d < 0.0 => return Err(invalid("air_distance_m", "must be non-negative")),
        Some(d) => AIR_DELAY_US_PER_KM * d / 1000.0,
        None => 0.0,
    };
    let wait_us = wait_latency(frame);
    let (lpu_frontend_us, lpu_local_us) = lpu_latency(model, n, k, kind);
    let fronthaul_us = fronthaul_latency(topology);
    let cpu_us = cpu_latency(model, k, kind);
    Ok(LatencyBreakdown {
        wait_us,
        lpu_frontend_us,
        lpu_local_us,
        fronthaul_us,
        cpu_us,
        propagation_us,
        total_us: wait_us + lpu_frontend_us + lpu_local_us + fronthaul_us + cpu_us + propagation_us,
    })
}

/// [`total_latency`] on a default linear chain of `p` panels.
pub fn default_total_latency(model: &CycleModel, n: usize, k: usize, p: usize, kind: EqualizerKind) -> Result<LatencyBreakdown> {
    total_latency(&FrameSpec::default(), model, n, k, p, kind, &ChainTopology::linear(p), None)
}
