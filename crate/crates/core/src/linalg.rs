//! Dense complex linear algebra helpers shared by the equalizers.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{LisError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Hermitian systems whose reciprocal condition number falls below this are
/// reported as singular instead of being solved.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// `H^H H`.
pub fn gramian(h: &CMatrix) -> CMatrix {
    h.ad_mul(h)
}

/// Ratio of smallest to largest eigenvalue of a Hermitian matrix, clamped at 0.
pub fn hermitian_rcond(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || !min.is_finite() {
        return 0.0;
    }
    (min / max).max(0.0)
}

/// Solves `a x = b` for Hermitian positive definite `a` via Cholesky.
///
/// Fails with [`LisError::SingularGramian`] when `a` is not numerically
/// positive definite at the [`SINGULAR_RCOND`] threshold.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(LisError::DimensionMismatch {
            context: "hermitian_solve: square system",
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    if b.nrows() != a.nrows() {
        return Err(LisError::DimensionMismatch {
            context: "hermitian_solve: right-hand side rows",
            expected: a.nrows(),
            actual: b.nrows(),
        });
    }
    let rcond = hermitian_rcond(a);
    if rcond < SINGULAR_RCOND {
        return Err(LisError::SingularGramian {
            rcond,
            threshold: SINGULAR_RCOND,
        });
    }
    let chol = Cholesky::new(a.clone()).ok_or(LisError::SingularGramian {
        rcond,
        threshold: SINGULAR_RCOND,
    })?;
    Ok(chol.solve(b))
}

pub fn hermitian_solve_vec(a: &CMatrix, b: &CVector) -> Result<CVector> {
    let x = hermitian_solve(a, &CMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(CVector::from_column_slice(x.as_slice()))
}

/// `a + s I`.
pub fn add_diagonal(a: &CMatrix, s: f64) -> CMatrix {
    let mut out = a.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] += Complex64::new(s, 0.0);
    }
    out
}

/// `‖a - b‖_F / ‖b‖_F`, or the absolute difference when `b` is zero.
pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let den = b.norm();
    let num = (a - b).norm();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn rel_diff_vec(a: &CVector, b: &CVector) -> f64 {
    let den = b.norm();
    let num = (a - b).norm();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
