//! Training losses and their gradients.
//!
//! The objective on a batch is
//!
//! ```text
//! L = CE(logits, y) + λ_mse·MSE(F, Z) + λ_cov·COV(Z) + λ_svd·SVD(Z)
//! ```
//!
//! where `F` is the frozen input batch and `Z` the head's transformed batch.
//! The three regularizers only produce gradients with respect to `Z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{center_columns, covariance, matmul, svd, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_mse: f64,
    pub lambda_cov: f64,
    pub lambda_svd: f64,
}

impl LossWeights {
    pub const fn zero() -> Self {
        Self::uniform(0.0)
    }

    pub const fn uniform(lambda: f64) -> Self {
        Self { lambda_mse: lambda, lambda_cov: lambda, lambda_svd: lambda }
    }

    pub fn is_zero(&self) -> bool {
        self.lambda_mse == 0.0 && self.lambda_cov == 0.0 && self.lambda_svd == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_mse", self.lambda_mse),
            ("lambda_cov", self.lambda_cov),
            ("lambda_svd", self.lambda_svd),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::zero()
    }
}

/// Per-term breakdown of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub ce: f64,
    pub mse: f64,
    pub cov: f64,
    pub svd: f64,
}

impl LossValue {
    pub fn combine(ce: f64, mse: f64, cov: f64, svd: f64, w: &LossWeights) -> Self {
        let total = ce + w.lambda_mse * mse + w.lambda_cov * cov + w.lambda_svd * svd;
        Self { total, ce, mse, cov, svd }
    }
}

/// How feature batches are normalized before the consistency loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each sample scaled to unit L2 norm; loss averaged over samples.
    #[default]
    PerRow,
    /// Whole batch scaled to unit Frobenius norm.
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerOptions {
    pub normalization: Normalization,
    /// Minimum relative gap `(sigma_1 - sigma_2) / sigma_1` for the
    /// dominant-singular-value gradient.
    pub svd_gap: f64,
}

impl Default for RegularizerOptions {
    fn default() -> Self {
        Self { normalization: Normalization::PerRow, svd_gap: DEFAULT_SVD_GAP }
    }
}

pub const DEFAULT_SVD_GAP: f64 = 1e-9;

/// Mean softmax cross-entropy and its gradient `(softmax - onehot) / M`.
pub fn ce_loss_grad(logits: &Matrix, labels: &[u32]) -> Result<(f64, Matrix)> {
    let (m, c) = logits.shape();
    if labels.len() != m {
        return Err(Error::Shape(format!("{} labels for {m} logit rows", labels.len())));
    }
    if m == 0 {
        return Err(Error::InsufficientSamples(0));
    }
    let mut grad = Matrix::zeros(m, c);
    let mut loss = 0.0;
    let inv_m = 1.0 / m as f64;
    for (i, &y) in labels.iter().enumerate() {
        let y = y as usize;
        if y >= c {
            return Err(Error::Label { index: i, label: y as u32, num_classes: c });
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_sum = sum.ln() + max;
        loss += log_sum - row[y];
        let g = grad.row_mut(i);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = (row[j] - log_sum).exp() * inv_m;
        }
        g[y] -= inv_m;
    }
    Ok((loss * inv_m, grad))
}

fn row_norms(x: &Matrix) -> Result<Vec<f64>> {
    (0..x.rows())
        .map(|i| {
            let n = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                Ok(n)
            } else {
                Err(Error::ZeroNorm(i))
            }
        })
        .collect()
}

/// Consistency loss between per-row L2-normalized `f` and `z`.
pub fn mse_consistency_loss_grad(f: &Matrix, z: &Matrix) -> Result<(f64, Matrix)> {
    mse_consistency_loss_grad_with(f, z, Normalization::PerRow)
}

pub fn mse_consistency_loss_grad_with(
    f: &Matrix,
    z: &Matrix,
    normalization: Normalization,
) -> Result<(f64, Matrix)> {
    if f.shape() != z.shape() {
        return Err(Error::Shape(format!(
            "consistency loss: F is {}x{}, Z is {}x{}",
            f.rows(),
            f.cols(),
            z.rows(),
            z.cols()
        )));
    }
    consistency(f, z, normalization, false)
}

fn consistency(f: &Matrix, z: &Matrix, normalization: Normalization, lenient: bool) -> Result<(f64, Matrix)> {
    match normalization {
        Normalization::PerRow => per_row_consistency(f, z, lenient),
        Normalization::Frobenius => frobenius_consistency(f, z),
    }
}

/// With `lenient`, a zero row normalizes to the zero vector and passes no
/// gradient instead of failing.
fn per_row_consistency(f: &Matrix, z: &Matrix, lenient: bool) -> Result<(f64, Matrix)> {
    let (m, d) = z.shape();
    let norms = |x: &Matrix| -> Result<Vec<f64>> {
        if lenient {
            Ok((0..x.rows()).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect())
        } else {
            row_norms(x)
        }
    };
    let f_norms = norms(f)?;
    let z_norms = norms(z)?;
    let unit = |v: f64, n: f64| if n > 0.0 { v / n } else { 0.0 };
    let mut grad = Matrix::zeros(m, d);
    let mut loss = 0.0;
    let scale = 2.0 / m as f64;
    for i in 0..m {
        let zn = z_norms[i];
        let z_hat: Vec<f64> = z.row(i).iter().map(|&v| unit(v, zn)).collect();
        let diff: Vec<f64> = z_hat
            .iter()
            .zip(f.row(i))
            .map(|(zh, &fv)| zh - unit(fv, f_norms[i]))
            .collect();
        loss += diff.iter().map(|v| v * v).sum::<f64>();
        if zn == 0.0 {
            continue;
        }
        // Jacobian of z / |z| is (I - ẑẑᵀ) / |z|.
        let proj: f64 = z_hat.iter().zip(&diff).map(|(a, b)| a * b).sum();
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g = scale * (diff[j] - z_hat[j] * proj) / zn;
        }
    }
    Ok((loss / m as f64, grad))
}

fn frobenius_consistency(f: &Matrix, z: &Matrix) -> Result<(f64, Matrix)> {
    let fz = f.frobenius_norm();
    let zz = z.frobenius_norm();
    if fz == 0.0 || zz == 0.0 {
        return Err(Error::ZeroNorm(0));
    }
    let z_hat = z.scale(1.0 / zz);
    let diff = z_hat.sub(&f.scale(1.0 / fz))?;
    let loss = diff.as_slice().iter().map(|v| v * v).sum();
    let proj: f64 = z_hat.as_slice().iter().zip(diff.as_slice()).map(|(a, b)| a * b).sum();
    let data = diff
        .as_slice()
        .iter()
        .zip(z_hat.as_slice())
        .map(|(dv, zh)| 2.0 * (dv - zh * proj) / zz)
        .collect();
    Ok((loss, Matrix::from_raw(z.rows(), z.cols(), data)))
}

/// `(1/D) Σ_{i≠j} C(Z)_ij²` and its gradient with respect to `Z`.
pub fn cov_loss_grad(z: &Matrix) -> Result<(f64, Matrix)> {
    let (m, d) = z.shape();
    let c = covariance(z)?;
    let mut off = c.clone();
    for i in 0..d {
        off[(i, i)] = 0.0;
    }
    let loss = off.as_slice().iter().map(|v| v * v).sum::<f64>() / d as f64;
    // dL/dC = (2/D)·C_off; C = ZcᵀZc/(M-1) gives dL/dZc = 2·Zc·dL/dC/(M-1).
    // Zc has zero column means, so the centering Jacobian passes it through.
    let zc = center_columns(z);
    let grad = matmul(&zc, &off)?.scale(4.0 / (d as f64 * (m - 1) as f64));
    Ok((loss, grad))
}

/// `-sigma_1 / Σ sigma` without a gradient; defined for any nonzero `z`.
pub fn svd_ratio_loss(z: &Matrix) -> Result<f64> {
    let sigma = svd(z)?.sigma;
    let total: f64 = sigma.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSpectrum("zero matrix has no dominant direction"));
    }
    Ok(-sigma[0] / total)
}

/// Dominant-singular-value ratio loss with the default gap.
pub fn svd_ratio_loss_grad(z: &Matrix) -> Result<(f64, Matrix)> {
    svd_ratio_loss_grad_with_gap(z, DEFAULT_SVD_GAP)
}

/// `-sigma_1 / Σ sigma` and its gradient, using `dσ_k/dZ = u_k v_kᵀ`.
///
/// Fails with [`Error::DegenerateGradient`] when the top two singular values
/// are within `gap · sigma_1` of each other.
pub fn svd_ratio_loss_grad_with_gap(z: &Matrix, gap: f64) -> Result<(f64, Matrix)> {
    let s = svd(z)?;
    let total: f64 = s.sigma.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSpectrum("zero matrix has no dominant direction"));
    }
    let s1 = s.sigma[0];
    if let Some(&s2) = s.sigma.get(1) {
        if s1 - s2 <= gap * s1 {
            return Err(Error::DegenerateGradient { sigma1: s1, sigma2: s2 });
        }
    }
    let loss = -s1 / total;
    let t2 = total * total;
    let coeff: Vec<f64> = (0..s.sigma.len())
        .map(|k| if k == 0 { -(total - s1) / t2 } else { s1 / t2 })
        .collect();
    let (m, d) = z.shape();
    let grad = Matrix::from_fn(m, d, |i, j| {
        coeff
            .iter()
            .enumerate()
            .map(|(k, c)| c * s.u[(i, k)] * s.v[(j, k)])
            .sum()
    });
    Ok((loss, grad))
}

/// Gradients of the total objective with respect to the head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalGrad {
    pub logits: Matrix,
    pub z: Matrix,
}

/// Full objective. Terms whose weight is zero are still evaluated for the
/// breakdown but contribute no gradient, so a zero-weight objective follows
/// exactly the cross-entropy gradient.
pub fn total_loss_grad(
    f: &Matrix,
    z: &Matrix,
    logits: &Matrix,
    labels: &[u32],
    weights: &LossWeights,
    opts: &RegularizerOptions,
) -> Result<(LossValue, TotalGrad)> {
    let out = evaluate(f, z, logits, labels, weights, opts, false)?;
    Ok((out.value, out.grad))
}

pub(crate) struct Evaluation {
    pub value: LossValue,
    pub grad: TotalGrad,
    pub svd_skipped: bool,
}

/// Shared by [`total_loss_grad`] and the training loop. With `lenient`, a
/// degenerate top singular pair drops only the SVD gradient for this batch,
/// and zero rows drop out of the consistency gradient, instead of failing.
pub(crate) fn evaluate(
    f: &Matrix,
    z: &Matrix,
    logits: &Matrix,
    labels: &[u32],
    weights: &LossWeights,
    opts: &RegularizerOptions,
    lenient: bool,
) -> Result<Evaluation> {
    weights.validate()?;
    if logits.rows() != z.rows() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} feature rows",
            logits.rows(),
            z.rows()
        )));
    }
    let (ce, grad_logits) = ce_loss_grad(logits, labels)?;
    let mut grad_z = Matrix::zeros(z.rows(), z.cols());

    let mse = match (weights.lambda_mse, consistency(f, z, opts.normalization, lenient)) {
        (w, Ok((v, g))) => {
            if w != 0.0 {
                grad_z.add_scaled(w, &g)?;
            }
            v
        }
        (w, Err(e)) => unweighted_fallback(w, e)?,
    };
    let (cov, g) = cov_loss_grad(z)?;
    if weights.lambda_cov != 0.0 {
        grad_z.add_scaled(weights.lambda_cov, &g)?;
    }

    let mut svd_skipped = false;
    let svd_value = if weights.lambda_svd != 0.0 {
        match svd_ratio_loss_grad_with_gap(z, opts.svd_gap) {
            Ok((v, g)) => {
                grad_z.add_scaled(weights.lambda_svd, &g)?;
                v
            }
            Err(Error::DegenerateGradient { .. }) if lenient => {
                svd_skipped = true;
                svd_ratio_loss(z)?
            }
            Err(e) => return Err(e),
        }
    } else {
        svd_ratio_loss(z).or_else(|e| unweighted_fallback(0.0, e))?
    };

    Ok(Evaluation {
        value: LossValue::combine(ce, mse, cov, svd_value, weights),
        grad: TotalGrad { logits: grad_logits, z: grad_z },
        svd_skipped,
    })
}

/// A term that carries no weight is only reported; when it cannot be
/// evaluated (zero-norm rows, an all-zero batch) it is reported as 0.
fn unweighted_fallback(weight: f64, err: Error) -> Result<f64> {
    match err {
        Error::ZeroNorm(_) | Error::DegenerateSpectrum(_) if weight == 0.0 => Ok(0.0),
        e => Err(e),
    }
}

/// Compares an analytic gradient against central differences.
///
/// Each coordinate is perturbed by `±h` (the step actually taken is measured
/// after rounding) and `(L(x+h) - L(x-h)) / 2h` is formed. The returned error
/// is `max_i |analytic_i - numeric_i|` divided by the larger infinity norm of
/// the two gradients, or 0 when both gradients vanish.
pub fn finite_diff_check<F>(mut loss_fn: F, point: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    assert_eq!(point.len(), analytic.len(), "gradient length mismatch");
    let mut x = point.to_vec();
    let mut numeric = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = x[i];
        let plus = orig + h;
        let minus = orig - h;
        x[i] = plus;
        let lp = loss_fn(&x);
        x[i] = minus;
        let lm = loss_fn(&x);
        x[i] = orig;
        numeric.push((lp - lm) / (plus - minus));
    }
    let scale = analytic
        .iter()
        .chain(&numeric)
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random(rng: &mut Rng, m: usize, d: usize) -> Matrix {
        Matrix::from_fn(m, d, |_, _| rng.normal())
    }

    fn check_z_grad(
        z: &Matrix,
        grad: &Matrix,
        loss: impl Fn(&Matrix) -> f64,
    ) -> f64 {
        let (m, d) = z.shape();
        finite_diff_check(
            |x| loss(&Matrix::new(m, d, x.to_vec()).unwrap()),
            z.as_slice(),
            grad.as_slice(),
            1e-5,
        )
    }

    #[test]
    fn ce_uniform_logits_give_ln_c() {
        let logits = Matrix::from_rows(&[[0.7; 5], [-2.0; 5], [0.0; 5]]).unwrap();
        let (loss, _) = ce_loss_grad(&logits, &[0, 3, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn ce_confident_correct_is_near_zero() {
        let logits = Matrix::from_rows(&[[100.0, 0.0, 0.0], [0.0, 0.0, 100.0]]).unwrap();
        let (loss, grad) = ce_loss_grad(&logits, &[0, 2]).unwrap();
        assert!(loss < 1e-40);
        assert!(grad.max_abs() < 1e-40);
    }

    #[test]
    fn ce_rejects_bad_label() {
        let logits = Matrix::zeros(2, 3);
        assert!(matches!(
            ce_loss_grad(&logits, &[0, 3]),
            Err(Error::Label { index: 1, label: 3, num_classes: 3 })
        ));
    }

    #[test]
    fn ce_gradient_4x3() {
        let mut rng = Rng::new(5);
        let logits = random(&mut rng, 4, 3);
        let labels = [2, 0, 1, 1];
        let (_, g) = ce_loss_grad(&logits, &labels).unwrap();
        let err = check_z_grad(&logits, &g, |x| ce_loss_grad(x, &labels).unwrap().0);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn mse_identical_and_rescaled() {
        let mut rng = Rng::new(6);
        let f = random(&mut rng, 3, 4);
        let (loss, grad) = mse_consistency_loss_grad(&f, &f).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.max_abs() < 1e-15);
        let (loss, _) = mse_consistency_loss_grad(&f, &f.scale(5.0)).unwrap();
        assert!(loss < 1e-30);
    }

    #[test]
    fn mse_gradient_3x4_both_normalizations() {
        let mut rng = Rng::new(7);
        let f = random(&mut rng, 3, 4);
        let z = random(&mut rng, 3, 4);
        for norm in [Normalization::PerRow, Normalization::Frobenius] {
            let (_, g) = mse_consistency_loss_grad_with(&f, &z, norm).unwrap();
            let err = check_z_grad(&z, &g, |x| mse_consistency_loss_grad_with(&f, x, norm).unwrap().0);
            assert!(err < 1e-6, "{norm:?}: {err}");
        }
    }

    #[test]
    fn mse_zero_row_is_reported() {
        let f = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let z = Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(mse_consistency_loss_grad(&f, &z), Err(Error::ZeroNorm(1))));
    }

    #[test]
    fn cov_hand_values() {
        let z = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        assert_eq!(cov_loss_grad(&z).unwrap().0, 0.0);
        let z = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 3.0]]).unwrap();
        assert!((cov_loss_grad(&z).unwrap().0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cov_gradient_5x3() {
        let mut rng = Rng::new(8);
        let z = random(&mut rng, 5, 3);
        let (_, g) = cov_loss_grad(&z).unwrap();
        let err = check_z_grad(&z, &g, |x| cov_loss_grad(x).unwrap().0);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn svd_ratio_known_spectra() {
        let u = [1.0, 2.0, -1.0];
        let v = [0.5, -0.5, 2.0, 1.0];
        let rank1 = Matrix::from_fn(3, 4, |i, j| u[i] * v[j]);
        assert!((svd_ratio_loss(&rank1).unwrap() + 1.0).abs() < 1e-14);
        let d = Matrix::diag(2, 2, &[3.0, 1.0]).unwrap();
        assert!((svd_ratio_loss(&d).unwrap() + 0.75).abs() < 1e-15);
        assert!((svd_ratio_loss_grad(&d).unwrap().0 + 0.75).abs() < 1e-15);
    }

    #[test]
    fn svd_ratio_gradient_6x4() {
        let mut rng = Rng::new(9);
        let z = random(&mut rng, 6, 4);
        let (_, g) = svd_ratio_loss_grad(&z).unwrap();
        let err = check_z_grad(&z, &g, |x| svd_ratio_loss(x).unwrap());
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn svd_ratio_degenerate_pair() {
        let z = Matrix::identity(3);
        assert!(matches!(
            svd_ratio_loss_grad(&z),
            Err(Error::DegenerateGradient { .. })
        ));
        assert!(matches!(
            svd_ratio_loss(&Matrix::zeros(3, 2)),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn zero_weights_reduce_to_ce() {
        let mut rng = Rng::new(10);
        let f = random(&mut rng, 6, 3);
        let z = random(&mut rng, 6, 3);
        let logits = random(&mut rng, 6, 4);
        let labels = [0, 1, 2, 3, 0, 1];
        let (value, grad) =
            total_loss_grad(&f, &z, &logits, &labels, &LossWeights::zero(), &Default::default()).unwrap();
        let (ce, g) = ce_loss_grad(&logits, &labels).unwrap();
        assert_eq!(value.total, ce);
        assert_eq!(grad.logits, g);
        assert_eq!(grad.z, Matrix::zeros(6, 3));
    }

    #[test]
    fn decorrelated_identity_leaves_only_svd_term() {
        let f = Matrix::from_rows(&[[3.0, 1.0], [3.0, -1.0], [-3.0, 1.0], [-3.0, -1.0]]).unwrap();
        let logits = Matrix::zeros(4, 2);
        let labels = [0, 1, 0, 1];
        let w = LossWeights::uniform(0.01);
        let (value, _) = total_loss_grad(&f, &f, &logits, &labels, &w, &Default::default()).unwrap();
        assert_eq!(value.mse, 0.0);
        assert_eq!(value.cov, 0.0);
        assert_eq!(value.total, value.ce + 0.01 * value.svd);
        assert!((value.svd + 0.75).abs() < 1e-14);
    }

    #[test]
    fn finite_diff_exact_on_linear_and_quadratic() {
        let c = [1.5, -2.0, 0.25, 3.0];
        let x = [0.5, 1.0, -3.0, 2.0];
        let err = finite_diff_check(
            |p| p.iter().zip(&c).map(|(a, b)| a * b).sum(),
            &x,
            &c,
            // Dyadic step: x ± h and every product stay exactly representable.
            2f64.powi(-16),
        );
        assert!(err <= 1e-12, "{err}");

        let grad: Vec<f64> = x.iter().zip(&c).map(|(xi, ci)| 2.0 * ci * xi).collect();
        let err = finite_diff_check(
            |p| p.iter().zip(&c).map(|(a, b)| b * a * a).sum(),
            &x,
            &grad,
            1e-5,
        );
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn finite_diff_flags_wrong_gradient() {
        let err = finite_diff_check(|p| p[0] * p[0], &[1.0], &[3.0], 1e-5);
        assert!(err > 0.3);
    }
}
