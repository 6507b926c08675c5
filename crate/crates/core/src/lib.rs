//! Uplink processing for panel-based large intelligent surfaces.
//!
//! The crate covers the indoor deployment geometry ([`scenario`]), near-field
//! Rician channels ([`channel`]), centralized and decentralized linear
//! equalization ([`equalize`]), daisy-chain aggregation between panels
//! ([`chain`]), a hardware-calibrated latency model ([`latency`]) and
//! spectral-efficiency Monte-Carlo sweeps ([`metrics`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod channel;
pub mod equalize;
pub mod error;
pub mod export;
pub mod latency;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scenario;

pub use error::{LisError, Result};
