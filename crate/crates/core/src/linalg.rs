//! Minimal dense linear algebra used by the rest of the crate.
//!
//! Backed by `nalgebra`; this module pins down the few operations the
//! solvers need (pivoted solve, smallest singular value, weighted inner
//! products) behind a small, testable surface.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense column vector of `f64`.
pub type Vector = DVector<f64>;
/// Dense matrix of `f64`.
pub type Matrix = DMatrix<f64>;

/// Builds a matrix from row-major entries.
pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Matrix> {
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "expected {} entries for a {}x{} matrix, got {}",
            rows * cols,
            rows,
            cols,
            entries.len()
        )));
    }
    if !entries.iter().all(|e| e.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    Ok(Matrix::from_row_slice(rows, cols, entries))
}

/// Solves the square system `A x = b` by pivoted LU.
///
/// Rejects numerically singular systems: the computed solution must satisfy
/// `|Ax - b| <= 1e-10 (|A||x| + |b|)`.
pub fn solve_square(a: &Matrix, b: &Vector) -> Result<Vector> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "solve_square needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "rhs length {} does not match matrix size {}",
            b.len(),
            a.nrows()
        )));
    }
    let x = a.clone().lu().solve(b).ok_or(Error::SingularMatrix)?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularMatrix);
    }
    let residual = (a * &x - b).norm();
    let scale = a.norm() * x.norm() + b.norm();
    if residual > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularMatrix);
    }
    Ok(x)
}

/// Smallest singular value of `a`, via full SVD.
///
/// The matrices handled here are small (at most the quadrature size), so a
/// full decomposition is cheaper than iterating on `A^T A`.
pub fn sigma_min(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().min()
}

/// Euclidean inner product with an optional positive weight per coordinate.
pub fn dot_weighted(u: &Vector, v: &Vector, weights: Option<&[f64]>) -> f64 {
    match weights {
        None => u.dot(v),
        Some(w) => u
            .iter()
            .zip(v.iter())
            .zip(w.iter())
            .map(|((a, b), wi)| wi * a * b)
            .sum(),
    }
}

/// Weighted Euclidean norm `sqrt(sum w_i v_i^2)`.
pub fn norm_weighted(v: &Vector, weights: Option<&[f64]>) -> f64 {
    dot_weighted(v, v, weights).max(0.0).sqrt()
}
