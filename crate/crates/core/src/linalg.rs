//! Weighted least-squares pseudoinverses.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Distance weight `1 / (1 + delta)^(p + 1)` for a data site `delta` cells
/// away from the stencil center.
pub fn distance_weight(delta: f64, p: usize) -> f64 {
    (1.0 + delta).powi(-(p as i32 + 1))
}

/// Returns `(W M)^+ W` for diagonal `W = diag(weights)`.
///
/// The matrix is rank deficient when any singular value falls below
/// `sigma_max * max(rows, cols) * eps`.
pub fn weighted_pseudoinverse(m: &DMatrix<f64>, weights: &[f64]) -> Result<DMatrix<f64>> {
    let ones = vec![1.0; m.ncols()];
    scaled_weighted_pseudoinverse(m, weights, &ones)
}

/// Returns `D (W M D)^+ W` with `D = diag(col_scale)`.
///
/// For full column rank this equals `(W M)^+ W`; the column scaling only
/// improves the conditioning of the factorization.
pub fn scaled_weighted_pseudoinverse(
    m: &DMatrix<f64>,
    weights: &[f64],
    col_scale: &[f64],
) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    assert_eq!(weights.len(), rows, "one weight per row");
    assert_eq!(col_scale.len(), cols, "one scale per column");
    if rows < cols {
        return Err(Error::RankDeficient { rank: rows, cols });
    }
    let a = DMatrix::from_fn(rows, cols, |i, j| weights[i] * m[(i, j)] * col_scale[j]);
    // Singular values decide the rank; the inverse itself comes from a
    // Householder QR, because the singular vectors returned for repeated
    // singular values (common on symmetric stencils) are not reliably
    // orthogonal.
    let sv = a.singular_values();
    let sigma_max = sv.max();
    let cutoff = sigma_max * rows.max(cols) as f64 * f64::EPSILON;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    if rank < cols || sigma_max == 0.0 {
        return Err(Error::RankDeficient { rank, cols });
    }
    let qr = a.qr();
    let q_t = qr.q().transpose();
    let r = qr.r();
    let mut pinv = r
        .solve_upper_triangular(&q_t)
        .ok_or(Error::RankDeficient { rank, cols })?;
    for i in 0..cols {
        for j in 0..rows {
            pinv[(i, j)] *= col_scale[i] * weights[j];
        }
    }
    Ok(pinv)
}

/// Solves the weighted least-squares problem `min |W (M c - d)|`.
pub fn weighted_least_squares(m: &DMatrix<f64>, weights: &[f64], data: &[f64]) -> Result<Vec<f64>> {
    let k = weighted_pseudoinverse(m, weights)?;
    Ok((k * DVector::from_column_slice(data))
        .iter()
        .copied()
        .collect())
}
