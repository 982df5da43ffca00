//! AdamW with decoupled weight decay, and the learning-rate schedules.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// One AdamW update of `params` at step `t` (1-based):
///
/// ```text
/// m ← β1·m + (1-β1)·g        v ← β2·v + (1-β2)·g²
/// p ← p·(1 - lr·wd) - lr·m̂ / (sqrt(v̂) + eps)
/// ```
///
/// `decay = false` skips the weight-decay factor (used for biases).
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut Moments,
    t: u64,
    lr: f64,
    hp: &AdamHyper,
    decay: bool,
) {
    assert!(t >= 1, "AdamW steps are 1-based");
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    let bc1 = 1.0 - hp.beta1.powf(t as f64);
    let bc2 = 1.0 - hp.beta2.powf(t as f64);
    let shrink = if decay { 1.0 - lr * hp.weight_decay } else { 1.0 };
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p = *p * shrink - lr * (m_hat / (v_hat.sqrt() + hp.eps));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Cosine,
    Constant,
}

impl Schedule {
    pub fn lr(&self, step: u64, total: u64, base_lr: f64) -> f64 {
        match self {
            Schedule::Cosine => cosine_lr(step, total, base_lr),
            Schedule::Constant => base_lr,
        }
    }
}

/// `base_lr · (1 + cos(π·t/total)) / 2`, no warmup.
pub fn cosine_lr(step: u64, total: u64, base_lr: f64) -> f64 {
    if total == 0 {
        return base_lr;
    }
    let t = step.min(total) as f64 / total as f64;
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_gradient_no_decay_is_identity() {
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        let mut st = Moments::new(3);
        adamw_step(&mut p, &[0.0; 3], &mut st, 1, 0.1, &AdamHyper::default(), true);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_scalar() {
        let mut p = [1.0];
        let mut st = Moments::new(1);
        adamw_step(&mut p, &[1.0], &mut st, 1, 0.1, &AdamHyper::default(), true);
        // m̂ = v̂ = g = 1 at t = 1.
        assert!((p[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((p[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn decay_only_step_shrinks() {
        let hp = AdamHyper { weight_decay: 0.01, ..Default::default() };
        let mut p = [2.0, -4.0];
        let mut st = Moments::new(2);
        adamw_step(&mut p, &[0.0, 0.0], &mut st, 1, 0.1, &hp, true);
        assert_eq!(p, [2.0 * (1.0 - 0.001), -4.0 * (1.0 - 0.001)]);

        let mut b = [2.0];
        let mut st = Moments::new(1);
        adamw_step(&mut b, &[0.0], &mut st, 1, 0.1, &hp, false);
        assert_eq!(b, [2.0]);
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(0, 100, 0.1), 0.1);
        assert!(cosine_lr(100, 100, 0.1).abs() < 1e-17);
        assert!((cosine_lr(50, 100, 0.1) - 0.05).abs() < 1e-17);
        assert_eq!(Schedule::Constant.lr(70, 100, 0.1), 0.1);
    }
}
