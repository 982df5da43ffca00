use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Matrix;

/// Center radius used when none is given.
pub const DEFAULT_CENTER_SCALE: f64 = 5.0;

/// Isotropic Gaussian blobs around random class centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub center_scale: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.dim == 0 || self.per_class == 0 {
            return Err(Error::Config("classes, dim and per-class count must all be >= 1".into()));
        }
        if !(self.noise_sigma > 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Config(format!("noise sigma must be positive, got {}", self.noise_sigma)));
        }
        if !self.center_scale.is_finite() || self.center_scale < 0.0 {
            return Err(Error::Config(format!("center scale must be >= 0, got {}", self.center_scale)));
        }
        if self.num_classes > u32::MAX as usize {
            return Err(Error::Config("too many classes".into()));
        }
        Ok(())
    }
}

/// Samples `per_class` rows per class, class-major. Each center is
/// `center_scale` times a uniformly random unit direction; each sample adds
/// N(0, sigma²) per coordinate. Values are rounded to `f32` precision so the
/// dataset survives a trip through a feature file unchanged.
pub fn make_mixture(spec: &MixtureSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| {
            let mut dir: Vec<f64> = (0..spec.dim).map(|_| rng.normal()).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            dir.iter_mut().for_each(|v| *v *= spec.center_scale / norm);
            dir
        })
        .collect();
    let n = spec.num_classes * spec.per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..spec.per_class {
            data.extend(center.iter().map(|&m| (m + spec.noise_sigma * rng.normal()) as f32 as f64));
            labels.push(c as u32);
        }
    }
    Dataset::new(Matrix::new(n, spec.dim, data)?, labels, spec.num_classes)
}
