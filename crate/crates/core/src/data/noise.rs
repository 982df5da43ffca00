use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub ratio: f64,
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn symmetric(ratio: f64, seed: u64) -> Self {
        Self { ratio, kind: NoiseKind::Symmetric, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyLabels {
    pub labels: Vec<u32>,
    /// `true` where the label was replaced.
    pub flipped: Vec<bool>,
}

impl NoisyLabels {
    pub fn flipped_indices(&self) -> Vec<usize> {
        self.flipped.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
    }

    pub fn flip_count(&self) -> usize {
        self.flipped.iter().filter(|&&f| f).count()
    }
}

/// Replaces exactly `round(ratio · N)` labels, chosen uniformly without
/// replacement, each by a uniform draw over the other `C - 1` classes.
pub fn inject_symmetric_noise(labels: &[u32], num_classes: usize, spec: &NoiseSpec) -> Result<NoisyLabels> {
    if !(0.0..=1.0).contains(&spec.ratio) {
        return Err(Error::Config(format!("noise ratio must be in [0, 1], got {}", spec.ratio)));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= num_classes) {
        return Err(Error::Label { index, label, num_classes });
    }
    if spec.ratio > 0.0 && num_classes < 2 {
        return Err(Error::NoiseImpossible(num_classes));
    }
    let n = labels.len();
    let count = ((spec.ratio * n as f64).round() as usize).min(n);
    let mut out = labels.to_vec();
    let mut flipped = vec![false; n];
    let mut rng = Rng::new(spec.seed);
    for i in rng.sample_indices(n, count) {
        let draw = rng.below(num_classes as u64 - 1) as u32;
        out[i] = if draw >= labels[i] { draw + 1 } else { draw };
        flipped[i] = true;
    }
    Ok(NoisyLabels { labels: out, flipped })
}
