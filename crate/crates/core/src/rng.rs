//! Seed splitting for reproducible Monte-Carlo runs.
//!
//! A realization's generator is seeded with `master + index` and placed on a
//! ChaCha stream chosen by what it draws, so placement, fading and noise
//! streams never share keystream even when their indices coincide.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers for the independent random quantities of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 1,
    Fading = 2,
    Noise = 3,
    Symbols = 4,
    Fuzz = 5,
}

pub fn realization_rng(master_seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed.wrapping_add(index));
    rng.set_stream(stream as u64);
    rng
}
