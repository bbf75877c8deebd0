//! Shared dense-algebra helpers: guarded symmetric solves and a few matrix
//! diagnostics used across the operator and filter modules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Condition threshold beyond which a Gram factor is treated as singular.
pub(crate) const COND_LIMIT: f64 = 1e12;

/// Spectral condition number of a symmetric matrix, `inf` when the smallest
/// eigenvalue is not positive.
pub(crate) fn sym_condition(m: &DMatrix<f64>) -> f64 {
    let sym = m.symmetric_part();
    let eigs = sym.symmetric_eigenvalues();
    let max = eigs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = eigs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min <= 0.0 || max <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `m x = rhs` for symmetric positive definite `m`, refusing matrices
/// whose condition exceeds [`COND_LIMIT`]. Cholesky first, LU as a fallback
/// for the nearly-semidefinite cases Cholesky rejects early.
pub(crate) fn solve_spd(
    m: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    factor: &'static str,
) -> Result<DMatrix<f64>> {
    let condition = sym_condition(m);
    if !condition.is_finite() || condition > COND_LIMIT {
        return Err(Error::SingularGram { factor, condition });
    }
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::SingularGram { factor, condition })
}

/// Solves `m x = rhs` for a general square `m` with an SVD condition guard.
pub(crate) fn solve_square(
    m: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    factor: &'static str,
) -> Result<DMatrix<f64>> {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let condition = if min <= 0.0 { f64::INFINITY } else { max / min };
    if !condition.is_finite() || condition > COND_LIMIT {
        return Err(Error::SingularCrossGram { factor, condition });
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::SingularCrossGram { factor, condition })
}

/// Frobenius mass of the off-diagonal part relative to the whole matrix.
/// Returns 0 for an all-zero matrix.
pub(crate) fn off_diagonal_ratio(m: &DMatrix<f64>) -> f64 {
    let total = m.norm();
    if total == 0.0 {
        return 0.0;
    }
    let mut off = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                off += m[(i, j)] * m[(i, j)];
            }
        }
    }
    off.sqrt() / total
}

/// Largest absolute deviation from symmetry.
pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
