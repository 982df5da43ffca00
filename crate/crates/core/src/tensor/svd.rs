//! Thin singular value decomposition by one-sided (Hestenes) Jacobi.
//!
//! The columns of a working copy of the matrix are rotated pairwise until
//! every pair is numerically orthogonal; the column norms are then the
//! singular values and the accumulated rotations form `V`. Wide inputs are
//! handled through the transpose so the working matrix always has at least as
//! many rows as columns.

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 80;

/// `F = U diag(sigma) Vᵀ` with `r = min(M, D)` terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdResult {
    /// M×r, orthonormal columns.
    pub u: Matrix,
    /// Descending, nonnegative.
    pub sigma: Vec<f64>,
    /// D×r, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank_capacity(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let (m, r) = self.u.shape();
        let d = self.v.rows();
        Matrix::from_fn(m, d, |i, j| {
            (0..r).map(|k| self.u[(i, k)] * self.sigma[k] * self.v[(j, k)]).sum()
        })
    }
}

pub fn svd(f: &Matrix) -> Result<SvdResult> {
    if f.is_empty() {
        return Err(Error::Shape(format!("svd of empty {}x{} matrix", f.rows(), f.cols())));
    }
    if !f.is_finite() {
        return Err(Error::Validation("svd input contains non-finite values".into()));
    }
    if f.rows() >= f.cols() {
        one_sided_jacobi(f)
    } else {
        let t = one_sided_jacobi(&f.transpose())?;
        Ok(SvdResult { u: t.v, sigma: t.sigma, v: t.u })
    }
}

/// Singular values only.
pub fn singular_values(f: &Matrix) -> Result<Vec<f64>> {
    svd(f).map(|s| s.sigma)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

fn one_sided_jacobi(a: &Matrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    // Column-major working copies: cols[j] is column j of A, vcols[j] of V.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let tol = (m as f64) * f64::EPSILON;
    // Columns at or below this norm are rounding noise: they are not rotated
    // and their left singular vectors are rebuilt by completion.
    let negligible = f64::EPSILON * a.frobenius_norm();
    let negligible_sq = negligible * negligible;

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha <= negligible_sq
                    || beta <= negligible_sq
                    || gamma == 0.0
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                let (lo, hi) = vcols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        for i in 0..n {
            v[(i, k)] = vcols[j][i];
        }
        if s > negligible && s.is_normal() {
            for i in 0..m {
                u[(i, k)] = cols[j][i] / s;
            }
        } else {
            missing.push(k);
        }
    }
    for k in missing {
        complete_column(&mut u, k);
    }
    Ok(SvdResult { u, sigma, v })
}

/// Fills column `k` of `u` with a unit vector orthogonal to every other
/// nonzero column, chosen from the standard basis by largest residual.
fn complete_column(u: &mut Matrix, k: usize) {
    let (m, r) = u.shape();
    let filled: Vec<usize> = (0..r)
        .filter(|&j| j != k && (0..m).any(|i| u[(i, j)] != 0.0))
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..m {
        let mut w = vec![0.0; m];
        w[e] = 1.0;
        // Two Gram–Schmidt passes.
        for _ in 0..2 {
            for &j in &filled {
                let proj: f64 = (0..m).map(|i| u[(i, j)] * w[i]).sum();
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi -= proj * u[(i, j)];
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        if best.as_ref().is_none_or(|(b, _)| norm > *b) {
            best = Some((norm, w));
        }
    }
    if let Some((norm, w)) = best {
        for i in 0..m {
            u[(i, k)] = w[i] / norm;
        }
    }
}
