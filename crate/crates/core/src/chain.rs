//! Daisy-chain aggregation across panels.
//!
//! The first node in the chain sends its local contribution downstream; every
//! later node decodes the incoming message, adds its own contribution and
//! forwards the sum. The last node also acts as the central unit and
//! finalizes equalization. Messages go through the byte-level wire format
//! below at every hop, so what a hop carries is exactly what gets counted.
//!
//! Wire format (little-endian):
//!
//! ```text
//! u32  K
//! u8   kind (0 = MRC, 1 = ZF, 2 = MMSE)
//! u32  panels absorbed so far
//! K × (f64 re, f64 im)              MRC vector
//! K(K+1)/2 × (f64 re, f64 im)       Gramian upper triangle, row-major, ZF/MMSE only
//! ```

use num_complex::Complex64;

use crate::equalize::{local_contribution, AggregateState, EqualizerKind};
use crate::error::{invalid, LisError, Result};
use crate::linalg::{CMatrix, CVector};

pub const DEFAULT_PER_HOP_LATENCY_US: f64 = 0.87;

/// Optical cable propagation delay.
pub const CABLE_DELAY_US_PER_KM: f64 = 5.6;

pub const MESSAGE_HEADER_BYTES: usize = 4 + 1 + 4;

const COMPLEX_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTopology {
    /// Panel ids in chain order; the last one finalizes.
    pub panel_order: Vec<usize>,
    pub per_hop_latency_us: f64,
    /// Cable length between consecutive panels. Zero disables the cable delay term.
    pub inter_panel_distance_m: f64,
}

impl ChainTopology {
    /// Panels chained in id order with default per-hop cost and no cable delay.
    pub fn linear(panel_count: usize) -> Self {
        Self {
            panel_order: (0..panel_count).collect(),
            per_hop_latency_us: DEFAULT_PER_HOP_LATENCY_US,
            inter_panel_distance_m: 0.0,
        }
    }

    pub fn with_order(mut self, order: Vec<usize>) -> Self {
        self.panel_order = order;
        self
    }

    pub fn len(&self) -> usize {
        self.panel_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panel_order.is_empty()
    }

    pub fn hop_count(&self) -> usize {
        self.panel_order.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.panel_order.is_empty() {
            return Err(LisError::EmptyChain);
        }
        if !(self.per_hop_latency_us >= 0.0) {
            return Err(invalid("per_hop_latency_us", "must be non-negative"));
        }
        if !(self.inter_panel_distance_m >= 0.0) {
            return Err(invalid("inter_panel_distance_m", "must be non-negative"));
        }
        let mut seen = vec![false; self.panel_order.len()];
        for &p in &self.panel_order {
            if p >= seen.len() || seen[p] {
                return Err(invalid("panel_order", "must be a permutation of 0..P"));
            }
            seen[p] = true;
        }
        Ok(())
    }

    /// Latency accumulated after `hops` transfers.
    pub fn latency_after_hops(&self, hops: usize) -> f64 {
        let cable_km = self.inter_panel_distance_m * hops as f64 / 1000.0;
        self.per_hop_latency_us * hops as f64 + CABLE_DELAY_US_PER_KM * cable_km
    }
}

/// Fronthaul latency of one full aggregation pass, in microseconds.
pub fn fronthaul_latency(topology: &ChainTopology) -> f64 {
    topology.latency_after_hops(topology.hop_count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopRecord {
    pub from_panel: usize,
    pub to_panel: usize,
    pub payload_complex_values: usize,
    pub message_bytes: usize,
    pub cumulative_latency_us: f64,
}

#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub equalized: CVector,
    pub hops: Vec<HopRecord>,
}

/// Runs one aggregation pass; `panel_inputs[p]` is `(H_p, y_p)` of panel `p`.
pub fn run_chain(
    topology: &ChainTopology,
    panel_inputs: &[(CMatrix, CVector)],
    kind: EqualizerKind,
    noise_power: f64,
) -> Result<ChainOutcome> {
    topology.validate()?;
    if panel_inputs.len() != topology.len() {
        return Err(LisError::DimensionMismatch {
            context: "run_chain: panel inputs",
            expected: topology.len(),
            actual: panel_inputs.len(),
        });
    }
    let k = panel_inputs[0].0.ncols();
    let mut hops = Vec::with_capacity(topology.hop_count());
    let mut incoming: Option<Vec<u8>> = None;
    let mut state = AggregateState::empty(k, kind.needs_gramian());

    for (pos, &panel) in topology.panel_order.iter().enumerate() {
        let (h_p, y_p) = &panel_inputs[panel];
        let local = local_contribution(h_p, y_p, kind.needs_gramian(), panel)?;
        state = match incoming.take() {
            Some(bytes) => decode_message(&bytes)?.1,
            None => AggregateState::empty(k, kind.needs_gramian()),
        };
        state = state.absorb(&local)?;

        if let Some(&next) = topology.panel_order.get(pos + 1) {
            let bytes = encode_message(&state, kind)?;
            hops.push(HopRecord {
                from_panel: panel,
                to_panel: next,
                payload_complex_values: (bytes.len() - MESSAGE_HEADER_BYTES) / COMPLEX_BYTES,
                message_bytes: bytes.len(),
                cumulative_latency_us: topology.latency_after_hops(pos + 1),
            });
            incoming = Some(bytes);
        }
    }

    Ok(ChainOutcome {
        equalized: state.finalize(kind, noise_power)?,
        hops,
    })
}

fn put_complex(out: &mut Vec<u8>, v: Complex64) {
    out.extend_from_slice(&v.re.to_le_bytes());
    out.extend_from_slice(&v.im.to_le_bytes());
}

/// Serializes an aggregate for the next hop.
pub fn encode_message(state: &AggregateState, kind: EqualizerKind) -> Result<Vec<u8>> {
    let k = state.k();
    let k32 = u32::try_from(k).map_err(|_| LisError::Wire("K does not fit in u32".into()))?;
    let absorbed = u32::try_from(state.panels_absorbed).map_err(|_| LisError::Wire("panel count does not fit in u32".into()))?;
    let values = crate::equalize::payload_complex_values(kind, k);
    let mut out = Vec::with_capacity(MESSAGE_HEADER_BYTES + values * COMPLEX_BYTES);
    out.extend_from_slice(&k32.to_le_bytes());
    out.push(kind.code());
    out.extend_from_slice(&absorbed.to_le_bytes());
    for &v in state.z_mrc_sum.iter() {
        put_complex(&mut out, v);
    }
    if kind.needs_gramian() {
        let g = state
            .gramian_sum
            .as_ref()
            .ok_or_else(|| LisError::Wire(format!("{kind} message requires a Gramian")))?;
        for i in 0..k {
            for j in i..k {
                put_complex(&mut out, g[(i, j)]);
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.buf.len() < N {
            return Err(LisError::Wire("message truncated".into()));
        }
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        Ok(head.try_into().expect("split length"))
    }

    fn complex(&mut self) -> Result<Complex64> {
        let re = f64::from_le_bytes(self.take()?);
        let im = f64::from_le_bytes(self.take()?);
        Ok(Complex64::new(re, im))
    }
}

/// Parses a message produced by [`encode_message`]. The Gramian is rebuilt
/// Hermitian from its upper triangle.
pub fn decode_message(bytes: &[u8]) -> Result<(EqualizerKind, AggregateState)> {
    let mut r = Reader { buf: bytes };
    let k = u32::from_le_bytes(r.take()?) as usize;
    let [code] = r.take::<1>()?;
    let kind = EqualizerKind::from_code(code).ok_or_else(|| LisError::Wire(format!("unknown kind code {code}")))?;
    let absorbed = u32::from_le_bytes(r.take()?) as usize;

    let expected = crate::equalize::payload_complex_values(kind, k) * COMPLEX_BYTES;
    if r.buf.len() != expected {
        return Err(LisError::Wire(format!(
            "expected {expected} payload bytes for K = {k}, got {}",
            r.buf.len()
        )));
    }
    let mut z = CVector::zeros(k);
    for v in z.iter_mut() {
        *v = r.complex()?;
    }
    let gramian = if kind.needs_gramian() {
        let mut g = CMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = r.complex()?;
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        Some(g)
    } else {
        None
    };
    Ok((
        kind,
        AggregateState {
            z_mrc_sum: z,
            gramian_sum: gramian,
            panels_absorbed: absorbed,
        },
    ))
}
