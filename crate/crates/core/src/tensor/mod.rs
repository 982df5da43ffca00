//! Dense matrices, SVD and covariance.

mod matrix;
mod svd;

pub use matrix::{matmul, matmul_nt, matmul_tn, Matrix};
pub use svd::{singular_values, svd, SvdResult, MAX_SWEEPS};

use crate::error::{Error, Result};

/// Returns `z` with its column means subtracted.
pub fn center_columns(z: &Matrix) -> Matrix {
    let means = z.column_means();
    Matrix::from_fn(z.rows(), z.cols(), |i, j| z[(i, j)] - means[j])
}

/// Sample covariance `1/(M-1) Σ (z_i - z̄)(z_i - z̄)ᵀ` of the rows of `z`.
///
/// The upper triangle is accumulated and mirrored, so the result is exactly
/// symmetric.
pub fn covariance(z: &Matrix) -> Result<Matrix> {
    let (m, d) = z.shape();
    if m < 2 {
        return Err(Error::InsufficientSamples(m));
    }
    let zc = center_columns(z);
    let denom = (m - 1) as f64;
    let mut c = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let s: f64 = (0..m).map(|k| zc[(k, i)] * zc[(k, j)]).sum();
            c[(i, j)] = s / denom;
            c[(j, i)] = s / denom;
        }
    }
    Ok(c)
}
