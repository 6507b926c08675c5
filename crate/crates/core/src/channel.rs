//! Near-field line-of-sight steering matrices and Rician channel draws.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LisError, Result};
use crate::linalg::{CMatrix, CVector};
use crate::scenario::{AntennaArray, Point3, UePlacement};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// LoS-to-scattered power ratio (linear).
    pub rician_factor_linear: f64,
    /// Noise power per receive antenna, N0.
    pub noise_power: f64,
    /// Set-average per-antenna receive SNR targeted by normalization (linear).
    pub target_snr_linear: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            rician_factor_linear: db_to_linear(5.0),
            noise_power: 1.0,
            target_snr_linear: db_to_linear(10.0),
        }
    }
}

impl ChannelParams {
    pub fn from_db(rician_db: f64, snr_db: f64, noise_power: f64) -> Result<Self> {
        let p = Self {
            rician_factor_linear: db_to_linear(rician_db),
            noise_power,
            target_snr_linear: db_to_linear(snr_db),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rician_factor_linear >= 0.0) {
            return Err(invalid("rician_factor_linear", "must be non-negative"));
        }
        if !(self.noise_power > 0.0) {
            return Err(invalid("noise_power", "must be positive"));
        }
        if !(self.target_snr_linear > 0.0) {
            return Err(invalid("target_snr_linear", "must be positive"));
        }
        Ok(())
    }
}

/// One fading draw together with the LoS matrix it was built around.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub h_los: CMatrix,
    pub noise_power: f64,
}

impl ChannelRealization {
    pub fn scaled(&self, beta: f64) -> Self {
        Self {
            h: &self.h * Complex64::new(beta, 0.0),
            h_los: &self.h_los * Complex64::new(beta, 0.0),
            noise_power: self.noise_power,
        }
    }
}

/// Spherical-wave gain from a user to one antenna.
///
/// Amplitude `sqrt(cos θ) / d` with `θ` the incidence angle against the
/// antenna normal (clamped to zero behind the antenna) and phase `-2π d / λ`.
pub fn los_entry(antenna_pos: &Point3, antenna_normal: &Point3, ue_pos: &Point3, wavelength: f64) -> Result<Complex64> {
    let delta = ue_pos - antenna_pos;
    let d = delta.norm();
    if d == 0.0 {
        return Err(LisError::ZeroDistance { antenna: 0, user: 0 });
    }
    Ok(los_gain(d, antenna_normal.dot(&delta) / d, wavelength))
}

fn los_gain(d: f64, cos_theta: f64, wavelength: f64) -> Complex64 {
    let amp = cos_theta.max(0.0).sqrt() / d;
    Complex64::from_polar(amp, -2.0 * PI * d / wavelength)
}

/// `M × K` LoS matrix; entry `(m, k)` is [`los_entry`] for antenna `m` and user `k`.
pub fn build_los_matrix(array: &AntennaArray, ues: &UePlacement, wavelength: f64) -> Result<CMatrix> {
    let m = array.total_antennas();
    let k = ues.len();
    if m == 0 || k == 0 {
        return Err(invalid("build_los_matrix", "antenna array and user set must be non-empty"));
    }
    if !(wavelength > 0.0) {
        return Err(invalid("wavelength", "must be positive"));
    }
    let mut out = CMatrix::zeros(m, k);
    for (ki, ue) in ues.positions.iter().enumerate() {
        for (mi, (pos, normal)) in array.positions.iter().zip(&array.normals).enumerate() {
            let delta = ue - pos;
            let d = delta.norm();
            if d == 0.0 {
                return Err(LisError::ZeroDistance { antenna: mi, user: ki });
            }
            out[(mi, ki)] = los_gain(d, normal.dot(&delta) / d, wavelength);
        }
    }
    Ok(out)
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Rician draw `sqrt(K/(1+K)) H_LoS + sqrt(1/(1+K)) H_R` where each scattered
/// entry has the power of its LoS counterpart.
pub fn sample_channel(h_los: &CMatrix, params: &ChannelParams, rng_seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_channel_with(h_los, params, &mut rng)
}

pub fn sample_channel_with<R: Rng + ?Sized>(
    h_los: &CMatrix,
    params: &ChannelParams,
    rng: &mut R,
) -> ChannelRealization {
    let kf = params.rician_factor_linear;
    let los_w = (kf / (1.0 + kf)).sqrt();
    let nlos_w = (1.0 / (1.0 + kf)).sqrt();
    // Column-major traversal fixes the draw order.
    let h = h_los.map(|g| g * los_w + complex_gaussian(rng, g.norm_sqr()) * nlos_w);
    ChannelRealization {
        h,
        h_los: h_los.clone(),
        noise_power: params.noise_power,
    }
}

/// Average per-antenna channel power `‖H‖²_F / (M K)` of one scenario.
pub fn mean_entry_power(h: &CMatrix) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    h.norm_squared() / h.len() as f64
}

/// Common amplitude scale β for a set of compared scenarios.
///
/// After scaling every channel by β, the mean over scenarios and users of
/// `‖h_k‖² / M`, divided by N0, equals the target SNR.
pub fn normalize_scenario_set(los_matrices: &[CMatrix], params: &ChannelParams) -> Result<f64> {
    if los_matrices.is_empty() {
        return Err(invalid("normalize_scenario_set", "at least one scenario is required"));
    }
    let avg = los_matrices.iter().map(mean_entry_power).sum::<f64>() / los_matrices.len() as f64;
    normalize_from_mean_power(avg, params)
}

/// β from an already computed set-average per-antenna power.
pub fn normalize_from_mean_power(mean_power: f64, params: &ChannelParams) -> Result<f64> {
    params.validate()?;
    if !(mean_power > 0.0) || !mean_power.is_finite() {
        return Err(LisError::ZeroPower);
    }
    Ok((params.target_snr_linear * params.noise_power / mean_power).sqrt())
}

/// `y = H s + n` with `n ~ CN(0, N0 I)`.
pub fn receive_vector(h: &CMatrix, symbols: &CVector, noise_power: f64, rng_seed: u64) -> Result<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    receive_vector_with(h, symbols, noise_power, &mut rng)
}

pub fn receive_vector_with<R: Rng + ?Sized>(
    h: &CMatrix,
    symbols: &CVector,
    noise_power: f64,
    rng: &mut R,
) -> Result<CVector> {
    if h.ncols() != symbols.len() {
        return Err(LisError::DimensionMismatch {
            context: "receive_vector: symbols",
            expected: h.ncols(),
            actual: symbols.len(),
        });
    }
    if !(noise_power >= 0.0) {
        return Err(invalid("noise_power", "must be non-negative"));
    }
    let mut y = h * symbols;
    if noise_power > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise_power);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{AntennaArray, PanelSpec};
    use nalgebra::Vector3;

    const LAMBDA: f64 = 0.1;

    fn broadside(d: f64) -> Complex64 {
        los_entry(&Vector3::zeros(), &Vector3::y(), &Vector3::new(0.0, d, 0.0), LAMBDA).unwrap()
    }

    #[test]
    fn broadside_magnitude_is_inverse_distance() {
        let g = broadside(2.37);
        assert!((g.norm() - 1.0 / 2.37).abs() < 1e-15);
    }

    #[test]
    fn in_plane_user_gets_zero_gain() {
        let g = los_entry(&Vector3::zeros(), &Vector3::y(), &Vector3::new(3.0, 0.0, 0.0), LAMBDA).unwrap();
        assert_eq!(g.norm(), 0.0);
        let behind = los_entry(&Vector3::zeros(), &Vector3::y(), &Vector3::new(0.0, -1.0, 0.0), LAMBDA).unwrap();
        assert_eq!(behind.norm(), 0.0);
    }

    #[test]
    fn one_wavelength_is_real_positive() {
        let g = broadside(LAMBDA);
        assert!(g.re > 0.0);
        assert!(g.im.abs() < 1e-12 * g.re);
    }

    #[test]
    fn zero_distance_rejected() {
        assert!(matches!(
            los_entry(&Vector3::zeros(), &Vector3::y(), &Vector3::zeros(), LAMBDA),
            Err(LisError::ZeroDistance { .. })
        ));
    }

    #[test]
    fn radial_step_of_one_wavelength_keeps_phase() {
        let a = broadside(1.234);
        let b = broadside(1.234 + LAMBDA);
        let dphi = (a.arg() - b.arg()).rem_euclid(2.0 * PI);
        let dphi = dphi.min(2.0 * PI - dphi);
        assert!(dphi < 1e-9, "{dphi}");
    }

    #[test]
    fn aperture_gain_decreases_with_angle() {
        let mut last = f64::INFINITY;
        for i in 0..=90 {
            let th = (i as f64).to_radians();
            let ue = Vector3::new(th.sin(), th.cos(), 0.0) * 2.0;
            let g = los_entry(&Vector3::zeros(), &Vector3::y(), &ue, LAMBDA).unwrap().norm();
            assert!(g <= last + 1e-15);
            last = g;
        }
    }

    fn two_antenna_array() -> AntennaArray {
        let panel = PanelSpec {
            origin: Vector3::zeros(),
            normal: Vector3::y(),
            width_dir: -Vector3::x(),
            rows: 1,
            cols: 2,
            spacing_m: LAMBDA / 2.0,
        };
        AntennaArray::from_panels(vec![panel]).unwrap()
    }

    #[test]
    fn symmetric_antennas_get_equal_magnitude() {
        let arr = two_antenna_array();
        let mid = (arr.positions[0] + arr.positions[1]) / 2.0;
        let ues = UePlacement {
            positions: vec![mid + Vector3::new(0.0, 3.0, 0.0)],
            plane_height_m: 0.0,
        };
        let h = build_los_matrix(&arr, &ues, LAMBDA).unwrap();
        assert!((h[(0, 0)].norm() - h[(1, 0)].norm()).abs() < 1e-15);
    }

    #[test]
    fn doubling_broadside_distance_halves_gain() {
        let arr = two_antenna_array();
        let mk = |d: f64| UePlacement {
            positions: vec![arr.positions[0] + Vector3::new(0.0, d, 0.0)],
            plane_height_m: 0.0,
        };
        let a = build_los_matrix(&arr, &mk(1.5), LAMBDA).unwrap();
        let b = build_los_matrix(&arr, &mk(3.0), LAMBDA).unwrap();
        assert!((b[(0, 0)].norm() * 2.0 - a[(0, 0)].norm()).abs() < 1e-15);
    }

    #[test]
    fn phase_difference_follows_path_difference() {
        let arr = two_antenna_array();
        let ue = arr.positions[0] + Vector3::new(0.0, 0.8, 0.0);
        let ues = UePlacement {
            positions: vec![ue],
            plane_height_m: 0.0,
        };
        let h = build_los_matrix(&arr, &ues, LAMBDA).unwrap();
        let d1 = (ue - arr.positions[0]).norm();
        let d2 = (ue - arr.positions[1]).norm();
        let expected = Complex64::from_polar(1.0, -2.0 * PI * (d2 - d1) / LAMBDA);
        let got = h[(1, 0)] / h[(0, 0)];
        let got = got / got.norm();
        assert!((got - expected).norm() < 1e-9);
    }

    #[test]
    fn coincident_user_rejected() {
        let arr = two_antenna_array();
        let ues = UePlacement {
            positions: vec![arr.positions[1]],
            plane_height_m: 0.0,
        };
        assert_eq!(
            build_los_matrix(&arr, &ues, LAMBDA).unwrap_err(),
            LisError::ZeroDistance { antenna: 1, user: 0 }
        );
    }

    fn test_los() -> CMatrix {
        CMatrix::from_fn(4, 2, |i, j| Complex64::from_polar(0.3 + 0.2 * i as f64 + 0.5 * j as f64, i as f64 - j as f64))
    }

    #[test]
    fn pure_los_limit() {
        let los = test_los();
        let p = ChannelParams {
            rician_factor_linear: 1e12,
            ..Default::default()
        };
        let r = sample_channel(&los, &p, 3);
        for (a, b) in r.h.iter().zip(los.iter()) {
            assert!((a - b).norm() / b.norm() < 1e-5);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let los = test_los();
        let p = ChannelParams::default();
        assert_eq!(sample_channel(&los, &p, 5).h, sample_channel(&los, &p, 5).h);
        assert_ne!(sample_channel(&los, &p, 5).h, sample_channel(&los, &p, 6).h);
    }

    #[test]
    fn entry_power_matches_los_power() {
        let los = test_los();
        let p = ChannelParams::default();
        let draws = 10_000;
        let mut acc = CMatrix::zeros(4, 2).map(|_: Complex64| 0.0f64);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..draws {
            let r = sample_channel_with(&los, &p, &mut rng);
            acc += r.h.map(|v| v.norm_sqr());
        }
        for (sum, g) in acc.iter().zip(los.iter()) {
            let mean = sum / draws as f64;
            assert!((mean / g.norm_sqr() - 1.0).abs() < 0.05, "{mean} vs {}", g.norm_sqr());
        }
    }

    #[test]
    fn constant_power_normalization() {
        let p = ChannelParams::default();
        let c: f64 = 0.04;
        let h = CMatrix::from_element(8, 3, Complex64::new(0.0, c.sqrt()));
        let beta = normalize_scenario_set(std::slice::from_ref(&h), &p).unwrap();
        assert!((beta - (p.target_snr_linear * p.noise_power / c).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalization_uses_set_mean() {
        let p = ChannelParams::default();
        let c: f64 = 0.5;
        let a = CMatrix::from_element(4, 2, Complex64::new(c.sqrt(), 0.0));
        let b = CMatrix::from_element(6, 2, Complex64::new((3.0 * c).sqrt(), 0.0));
        let beta = normalize_scenario_set(&[a, b], &p).unwrap();
        assert!((beta - (p.target_snr_linear * p.noise_power / (2.0 * c)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalized_set_measures_target_snr_and_is_idempotent() {
        let p = ChannelParams::default();
        let set: Vec<CMatrix> = (0..3)
            .map(|s| CMatrix::from_fn(5 + s, 3, |i, j| Complex64::new(0.1 * (i + 1) as f64, 0.02 * (j + s) as f64)))
            .collect();
        let beta = normalize_scenario_set(&set, &p).unwrap();
        let scaled: Vec<CMatrix> = set.iter().map(|h| h * Complex64::new(beta, 0.0)).collect();
        let snr = scaled.iter().map(mean_entry_power).sum::<f64>() / 3.0 / p.noise_power;
        assert!((linear_to_db(snr) - 10.0).abs() < 0.01);
        let again = normalize_scenario_set(&scaled, &p).unwrap();
        assert!((again - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_channels_rejected() {
        let p = ChannelParams::default();
        assert_eq!(
            normalize_scenario_set(&[CMatrix::zeros(2, 2)], &p).unwrap_err(),
            LisError::ZeroPower
        );
        assert!(normalize_scenario_set(&[], &p).is_err());
    }

    #[test]
    fn noiseless_receive() {
        let h = test_los();
        let s = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)]);
        assert_eq!(receive_vector(&h, &s, 0.0, 1).unwrap(), &h * &s);
        let id = CMatrix::identity(3, 3);
        let e1 = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::default(), Complex64::default()]);
        assert_eq!(receive_vector(&id, &e1, 0.0, 9).unwrap(), e1);
    }

    #[test]
    fn receive_dimension_mismatch() {
        let s = CVector::zeros(3);
        assert!(matches!(
            receive_vector(&test_los(), &s, 1.0, 0),
            Err(LisError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn noise_energy() {
        let h = test_los();
        let s = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        let hs = &h * &s;
        let n0 = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 10_000;
        let total: f64 = (0..draws)
            .map(|_| (receive_vector_with(&h, &s, n0, &mut rng).unwrap() - &hs).norm_squared())
            .sum();
        let mean = total / draws as f64;
        assert!((mean / (4.0 * n0) - 1.0).abs() < 0.05);
    }
}
