//! Linear MRC / ZF / MMSE equalization.
//!
//! The centralized path builds the full `K × M` equalization matrix. The
//! decentralized path never touches more than one panel's rows at a time:
//! every panel reduces its `N × K` channel and `N` received samples to a
//! `K`-vector `H_p^H y_p` and (for ZF/MMSE) a `K × K` Gramian `H_p^H H_p`.
//! Those sum to the global quantities, from which the last node finishes
//! the job with one `K × K` solve.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LisError, Result};
use crate::linalg::{add_diagonal, gramian, hermitian_solve, hermitian_solve_vec, CMatrix, CVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EqualizerKind {
    #[serde(rename = "MRC")]
    Mrc,
    #[serde(rename = "ZF")]
    Zf,
    #[serde(rename = "MMSE")]
    Mmse,
}

impl EqualizerKind {
    pub const ALL: [EqualizerKind; 3] = [EqualizerKind::Mrc, EqualizerKind::Zf, EqualizerKind::Mmse];

    /// Whether panels must share their local Gramians.
    pub fn needs_gramian(self) -> bool {
        !matches!(self, EqualizerKind::Mrc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EqualizerKind::Mrc => "MRC",
            EqualizerKind::Zf => "ZF",
            EqualizerKind::Mmse => "MMSE",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            EqualizerKind::Mrc => 0,
            EqualizerKind::Zf => 1,
            EqualizerKind::Mmse => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EqualizerKind::Mrc),
            1 => Some(EqualizerKind::Zf),
            2 => Some(EqualizerKind::Mmse),
            _ => None,
        }
    }
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EqualizerKind {
    type Err = LisError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MRC" => Ok(EqualizerKind::Mrc),
            "ZF" => Ok(EqualizerKind::Zf),
            "MMSE" => Ok(EqualizerKind::Mmse),
            other => Err(invalid("equalizer kind", format!("unknown kind `{other}`"))),
        }
    }
}

/// Complex values carried per aggregation message: the MRC vector, plus the
/// upper triangle of the Gramian for ZF/MMSE.
pub fn payload_complex_values(kind: EqualizerKind, k: usize) -> usize {
    if kind.needs_gramian() {
        k + k * (k + 1) / 2
    } else {
        k
    }
}

/// Centralized `K × M` equalization matrix.
pub fn equalizer_matrix(kind: EqualizerKind, h: &CMatrix, noise_power: f64) -> Result<CMatrix> {
    let hh = h.adjoint();
    match kind {
        EqualizerKind::Mrc => Ok(hh),
        EqualizerKind::Zf => hermitian_solve(&gramian(h), &hh),
        EqualizerKind::Mmse => {
            if !(noise_power >= 0.0) {
                return Err(invalid("noise_power", "must be non-negative"));
            }
            hermitian_solve(&add_diagonal(&gramian(h), noise_power), &hh)
        }
    }
}

/// What one panel sends into the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalContribution {
    pub z_mrc_local: CVector,
    pub gramian_local: Option<CMatrix>,
    pub panel_id: usize,
}

impl LocalContribution {
    pub fn k(&self) -> usize {
        self.z_mrc_local.len()
    }
}

pub fn local_contribution(h_p: &CMatrix, y_p: &CVector, need_gramian: bool, panel_id: usize) -> Result<LocalContribution> {
    if h_p.nrows() != y_p.len() {
        return Err(LisError::DimensionMismatch {
            context: "local_contribution: received samples",
            expected: h_p.nrows(),
            actual: y_p.len(),
        });
    }
    Ok(LocalContribution {
        z_mrc_local: h_p.ad_mul(y_p),
        gramian_local: need_gramian.then(|| gramian(h_p)),
        panel_id,
    })
}

/// Running sums held by a chain node.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateState {
    pub z_mrc_sum: CVector,
    pub gramian_sum: Option<CMatrix>,
    pub panels_absorbed: usize,
}

impl AggregateState {
    pub fn empty(k: usize, with_gramian: bool) -> Self {
        Self {
            z_mrc_sum: CVector::zeros(k),
            gramian_sum: with_gramian.then(|| CMatrix::zeros(k, k)),
            panels_absorbed: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.z_mrc_sum.len()
    }

    /// Adds one panel's contribution.
    pub fn absorb(mut self, contribution: &LocalContribution) -> Result<Self> {
        if contribution.k() != self.k() {
            return Err(LisError::DimensionMismatch {
                context: "absorb: user count",
                expected: self.k(),
                actual: contribution.k(),
            });
        }
        match (&mut self.gramian_sum, &contribution.gramian_local) {
            (Some(sum), Some(g)) => {
                if g.nrows() != sum.nrows() || g.ncols() != sum.ncols() {
                    return Err(LisError::DimensionMismatch {
                        context: "absorb: Gramian size",
                        expected: sum.nrows(),
                        actual: g.nrows(),
                    });
                }
                *sum += g;
            }
            (Some(_), None) => {
                return Err(invalid("absorb", "contribution lacks the Gramian the aggregate carries"));
            }
            (None, _) => {}
        }
        self.z_mrc_sum += &contribution.z_mrc_local;
        self.panels_absorbed += 1;
        Ok(self)
    }

    /// Finishes equalization from the aggregated sums.
    pub fn finalize(&self, kind: EqualizerKind, noise_power: f64) -> Result<CVector> {
        if kind == EqualizerKind::Mrc {
            return Ok(self.z_mrc_sum.clone());
        }
        let g = self
            .gramian_sum
            .as_ref()
            .ok_or_else(|| invalid("finalize", format!("{kind} needs the aggregated Gramian")))?;
        match kind {
            EqualizerKind::Zf => hermitian_solve_vec(g, &self.z_mrc_sum),
            EqualizerKind::Mmse => {
                if !(noise_power >= 0.0) {
                    return Err(invalid("noise_power", "must be non-negative"));
                }
                hermitian_solve_vec(&add_diagonal(g, noise_power), &self.z_mrc_sum)
            }
            EqualizerKind::Mrc => unreachable!(),
        }
    }
}

/// Splits `(H, y)` into `panel_count` consecutive row blocks.
pub fn split_panels(h: &CMatrix, y: &CVector, panel_count: usize) -> Result<Vec<(CMatrix, CVector)>> {
    if panel_count == 0 || !h.nrows().is_multiple_of(panel_count) {
        return Err(invalid(
            "panel_count",
            format!("{panel_count} panels do not divide {} antennas", h.nrows()),
        ));
    }
    if h.nrows() != y.len() {
        return Err(LisError::DimensionMismatch {
            context: "split_panels: received samples",
            expected: h.nrows(),
            actual: y.len(),
        });
    }
    let n = h.nrows() / panel_count;
    Ok((0..panel_count)
        .map(|p| (h.rows(p * n, n).into_owned(), y.rows(p * n, n).into_owned()))
        .collect())
}

/// Decentralized equalization over panels absorbed in index order.
pub fn decentralized_equalize(
    h: &CMatrix,
    y: &CVector,
    panel_count: usize,
    kind: EqualizerKind,
    noise_power: f64,
) -> Result<CVector> {
    let mut state = AggregateState::empty(h.ncols(), kind.needs_gramian());
    for (p, (h_p, y_p)) in split_panels(h, y, panel_count)?.iter().enumerate() {
        state = state.absorb(&local_contribution(h_p, y_p, kind.needs_gramian(), p)?)?;
    }
    state.finalize(kind, noise_power)
}

pub fn centralized_equalize(h: &CMatrix, y: &CVector, kind: EqualizerKind, noise_power: f64) -> Result<CVector> {
    Ok(equalizer_matrix(kind, h, noise_power)? * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::linalg::{rel_diff, rel_diff_vec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut impl Rng, m: usize, k: usize) -> CMatrix {
        CMatrix::from_fn(m, k, |_, _| complex_gaussian(rng, 1.0))
    }

    fn random_vector(rng: &mut impl Rng, m: usize) -> CVector {
        CVector::from_fn(m, |_, _| complex_gaussian(rng, 1.0))
    }

    /// Entry-by-entry conjugate product sums, independent of the matrix routines.
    fn brute_gramian(h: &CMatrix) -> CMatrix {
        let mut g = CMatrix::zeros(h.ncols(), h.ncols());
        for i in 0..h.ncols() {
            for j in 0..h.ncols() {
                let mut acc = c(0.0, 0.0);
                for m in 0..h.nrows() {
                    acc += h[(m, i)].conj() * h[(m, j)];
                }
                g[(i, j)] = acc;
            }
        }
        g
    }

    #[test]
    fn identity_channel_matrices() {
        let h = CMatrix::identity(2, 2);
        assert!(rel_diff(&equalizer_matrix(EqualizerKind::Zf, &h, 0.7).unwrap(), &h) < 1e-15);
        let mmse = equalizer_matrix(EqualizerKind::Mmse, &h, 1.0).unwrap();
        assert!(rel_diff(&mmse, &(h.clone() * c(0.5, 0.0))) < 1e-15);
        assert_eq!(equalizer_matrix(EqualizerKind::Mrc, &h, 1.0).unwrap(), h);
    }

    #[test]
    fn mmse_approaches_zf() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_matrix(&mut rng, 8, 4);
        let zf = equalizer_matrix(EqualizerKind::Zf, &h, 0.0).unwrap();
        let mmse = equalizer_matrix(EqualizerKind::Mmse, &h, 1e-12).unwrap();
        assert!(rel_diff(&mmse, &zf) < 1e-8);
    }

    #[test]
    fn zf_inverts_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_matrix(&mut rng, 32, 6);
        let w = equalizer_matrix(EqualizerKind::Zf, &h, 0.0).unwrap();
        assert!((w * &h - CMatrix::identity(6, 6)).norm() < 1e-9);
    }

    #[test]
    fn singular_gramian_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // more users than antennas
        let h = random_matrix(&mut rng, 3, 5);
        assert!(matches!(
            equalizer_matrix(EqualizerKind::Zf, &h, 0.0),
            Err(LisError::SingularGramian { .. })
        ));
        assert!(matches!(
            equalizer_matrix(EqualizerKind::Mmse, &h, 0.0),
            Err(LisError::SingularGramian { .. })
        ));
        assert!(equalizer_matrix(EqualizerKind::Mmse, &h, 0.1).is_ok());
    }

    #[test]
    fn scalar_local_contribution() {
        let lc = local_contribution(
            &CMatrix::from_element(1, 1, c(2.0, 0.0)),
            &CVector::from_element(1, c(3.0, 0.0)),
            true,
            0,
        )
        .unwrap();
        assert_eq!(lc.z_mrc_local[0], c(6.0, 0.0));
        assert_eq!(lc.gramian_local.unwrap()[(0, 0)], c(4.0, 0.0));
    }

    #[test]
    fn mrc_contribution_omits_gramian() {
        let lc = local_contribution(&CMatrix::identity(2, 2), &CVector::zeros(2), false, 3).unwrap();
        assert!(lc.gramian_local.is_none());
        assert_eq!(lc.panel_id, 3);
    }

    #[test]
    fn orthonormal_columns_give_identity_gramian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_matrix(&mut rng, 16, 4).qr().q();
        let lc = local_contribution(&q, &CVector::zeros(16), true, 0).unwrap();
        assert!((lc.gramian_local.unwrap() - CMatrix::identity(4, 4)).norm() < 1e-13);
    }

    #[test]
    fn gramian_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_matrix(&mut rng, 16, 4);
        let lc = local_contribution(&h, &random_vector(&mut rng, 16), true, 0).unwrap();
        let g = lc.gramian_local.unwrap();
        let brute = brute_gramian(&h);
        assert!(rel_diff(&g, &brute) < 1e-12);
        // Hermitian and PSD
        assert!((g.adjoint() - &g).norm() <= 1e-12 * g.norm());
        let eig = nalgebra::SymmetricEigen::new(g.clone());
        assert!(eig.eigenvalues.min() >= -1e-10 * g.norm());
    }

    #[test]
    fn local_dimension_check() {
        assert!(local_contribution(&CMatrix::zeros(4, 2), &CVector::zeros(3), true, 0).is_err());
    }

    #[test]
    fn absorb_zero_and_scalar() {
        let mk = |z: f64, g: f64| LocalContribution {
            z_mrc_local: CVector::from_element(1, c(z, 0.0)),
            gramian_local: Some(CMatrix::from_element(1, 1, c(g, 0.0))),
            panel_id: 0,
        };
        let s = AggregateState::empty(1, true).absorb(&mk(6.0, 4.0)).unwrap();
        let s2 = s.clone().absorb(&mk(0.0, 0.0)).unwrap();
        assert_eq!(s2.z_mrc_sum, s.z_mrc_sum);
        assert_eq!(s2.gramian_sum, s.gramian_sum);
        let s3 = s.absorb(&mk(1.0, 1.0)).unwrap();
        assert_eq!(s3.gramian_sum.unwrap()[(0, 0)], c(5.0, 0.0));
        assert_eq!(s3.z_mrc_sum[0], c(7.0, 0.0));
        assert_eq!(s3.panels_absorbed, 2);
    }

    #[test]
    fn absorb_rejects_k_mismatch() {
        let lc = local_contribution(&CMatrix::zeros(2, 3), &CVector::zeros(2), true, 0).unwrap();
        assert!(matches!(
            AggregateState::empty(2, true).absorb(&lc),
            Err(LisError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn absorb_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let contributions: Vec<_> = (0..8)
            .map(|p| {
                let h = random_matrix(&mut rng, 8, 4);
                local_contribution(&h, &random_vector(&mut rng, 8), true, p).unwrap()
            })
            .collect();
        let fold = |order: &[usize]| {
            order
                .iter()
                .try_fold(AggregateState::empty(4, true), |s, &i| s.absorb(&contributions[i]))
                .unwrap()
        };
        let a = fold(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let b = fold(&[7, 2, 5, 0, 3, 6, 1, 4]);
        assert!(rel_diff_vec(&a.z_mrc_sum, &b.z_mrc_sum) < 1e-12);
        assert!(rel_diff(a.gramian_sum.as_ref().unwrap(), b.gramian_sum.as_ref().unwrap()) < 1e-12);
    }

    #[test]
    fn finalize_mrc_is_passthrough() {
        let mut s = AggregateState::empty(3, false);
        s.z_mrc_sum = CVector::from_vec(vec![c(1.0, 2.0), c(-1.0, 0.0), c(0.0, 3.0)]);
        assert_eq!(s.finalize(EqualizerKind::Mrc, 1.0).unwrap(), s.z_mrc_sum);
        assert!(s.finalize(EqualizerKind::Zf, 1.0).is_err());
    }

    #[test]
    fn noiseless_zf_recovers_symbols() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_matrix(&mut rng, 32, 4);
        let s = random_vector(&mut rng, 4);
        let y = &h * &s;
        let z = decentralized_equalize(&h, &y, 4, EqualizerKind::Zf, 0.0).unwrap();
        assert!((z - s).norm() < 1e-9);
    }

    #[test]
    fn decentralized_matches_centralized() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let h = random_matrix(&mut rng, 64, 8);
            let y = random_vector(&mut rng, 64);
            for kind in EqualizerKind::ALL {
                let central = centralized_equalize(&h, &y, kind, 0.5).unwrap();
                let dec = decentralized_equalize(&h, &y, 4, kind, 0.5).unwrap();
                assert!(rel_diff_vec(&dec, &central) < 1e-10, "{kind}");
            }
        }
    }

    #[test]
    fn gramian_additivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_matrix(&mut rng, 48, 5);
        let y = random_vector(&mut rng, 48);
        let mut state = AggregateState::empty(5, true);
        for (p, (hp, yp)) in split_panels(&h, &y, 6).unwrap().iter().enumerate() {
            state = state.absorb(&local_contribution(hp, yp, true, p).unwrap()).unwrap();
        }
        assert!(rel_diff(state.gramian_sum.as_ref().unwrap(), &gramian(&h)) < 1e-10);
    }

    #[test]
    fn mmse_output_shrinks_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = random_matrix(&mut rng, 16, 4);
        let y = random_vector(&mut rng, 16);
        let mut state = AggregateState::empty(4, true);
        state = state.absorb(&local_contribution(&h, &y, true, 0).unwrap()).unwrap();
        let mut last = f64::INFINITY;
        for n0 in [0.0, 0.01, 0.1, 0.5, 1.0, 5.0, 50.0] {
            let norm = state.finalize(EqualizerKind::Mmse, n0).unwrap().norm();
            assert!(norm <= last * (1.0 + 1e-12));
            last = norm;
        }
    }

    #[test]
    fn payload_sizes() {
        assert_eq!(payload_complex_values(EqualizerKind::Mrc, 8), 8);
        assert_eq!(payload_complex_values(EqualizerKind::Zf, 8), 44);
        assert_eq!(payload_complex_values(EqualizerKind::Mmse, 1), 2);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("mmse".parse::<EqualizerKind>().unwrap(), EqualizerKind::Mmse);
        assert!("lmmse".parse::<EqualizerKind>().is_err());
        for k in EqualizerKind::ALL {
            assert_eq!(EqualizerKind::from_code(k.code()), Some(k));
        }
    }
}
