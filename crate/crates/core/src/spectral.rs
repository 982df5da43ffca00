//! Singular-value entropy (SVE) and largest-singular-value ratio (LSVR).
//!
//! Both read the spectrum as a distribution `p_i = sigma_i / Σ sigma`:
//! SVE is its Shannon entropy and LSVR is `-ln p_1`. Natural log throughout,
//! so both lie in `[0, ln r]` for `r` singular values. Zero singular values
//! contribute nothing (`0 ln 0 = 0`), which is why padding a short spectrum
//! with zeros changes neither metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{svd, Matrix};

pub const TOP_K: usize = 20;
/// Upper rank bound of the middle plotting group (ranks 21..=500).
pub const BODY_END: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    sigma: Vec<f64>,
    sample_count: usize,
    ambient_dim: usize,
}

impl SingularSpectrum {
    pub fn new(sigma: Vec<f64>, sample_count: usize, ambient_dim: usize) -> Result<Self> {
        if sigma.len() != sample_count.min(ambient_dim) {
            return Err(Error::Shape(format!(
                "spectrum of a {sample_count}x{ambient_dim} matrix needs {} values, got {}",
                sample_count.min(ambient_dim),
                sigma.len()
            )));
        }
        if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Validation("singular values must be finite and nonnegative".into()));
        }
        if sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Validation("singular values must be descending".into()));
        }
        Ok(Self { sigma, sample_count, ambient_dim })
    }

    pub fn of(f: &Matrix) -> Result<Self> {
        Self::new(svd(f)?.sigma, f.rows(), f.cols())
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn mass(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

/// Entropy of the normalized spectrum. Accepts any nonnegative values, in any
/// order.
pub fn singular_value_entropy(sigma: &[f64]) -> Result<f64> {
    let total: f64 = sigma.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateSpectrum("singular values sum to zero"));
    }
    let h: f64 = sigma
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| {
            let p = s / total;
            -p * p.ln()
        })
        .sum();
    // Normalizes -0.0 from a single-mass spectrum.
    Ok(h + 0.0)
}

/// `-ln(sigma_1 / Σ sigma)` where `sigma_1` is the largest value.
pub fn largest_singular_value_ratio(sigma: &[f64]) -> Result<f64> {
    let top = sigma.iter().copied().fold(0.0_f64, f64::max);
    if !(top > 0.0) {
        return Err(Error::DegenerateSpectrum("largest singular value is zero"));
    }
    let total: f64 = sigma.iter().sum();
    Ok((total / top).ln())
}

pub fn sve(s: &SingularSpectrum) -> Result<f64> {
    singular_value_entropy(&s.sigma)
}

pub fn lsvr(s: &SingularSpectrum) -> Result<f64> {
    largest_singular_value_ratio(&s.sigma)
}

/// Which rows a spectrum was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumScope {
    Full,
    Subsample,
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedValue {
    /// 1-based rank.
    pub rank: usize,
    pub sigma: f64,
}

/// The spectrum split for plotting: ranks 1–20, 21–500, and the remainder.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectrumGroups {
    pub head: Vec<f64>,
    pub body: Vec<f64>,
    pub tail: Vec<f64>,
}

impl SpectrumGroups {
    pub fn split(sigma: &[f64]) -> Self {
        let head_end = sigma.len().min(TOP_K);
        let body_end = sigma.len().min(BODY_END);
        Self {
            head: sigma[..head_end].to_vec(),
            body: sigma[head_end..body_end].to_vec(),
            tail: sigma[body_end..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub scope: SpectrumScope,
    pub sample_count: usize,
    pub ambient_dim: usize,
    pub sve: f64,
    pub lsvr: f64,
    pub top_k: Vec<RankedValue>,
    pub effective_mass: f64,
    pub groups: SpectrumGroups,
}

impl SpectrumReport {
    pub fn from_spectrum(s: &SingularSpectrum, scope: SpectrumScope) -> Result<Self> {
        Ok(Self {
            scope,
            sample_count: s.sample_count,
            ambient_dim: s.ambient_dim,
            sve: sve(s)?,
            lsvr: lsvr(s)?,
            top_k: s
                .sigma
                .iter()
                .take(TOP_K)
                .enumerate()
                .map(|(i, &sigma)| RankedValue { rank: i + 1, sigma })
                .collect(),
            effective_mass: s.mass(),
            groups: SpectrumGroups::split(&s.sigma),
        })
    }
}

/// SVD of the full matrix followed by both metrics and the plotting groups.
pub fn spectrum_report(f: &Matrix) -> Result<SpectrumReport> {
    SpectrumReport::from_spectrum(&SingularSpectrum::of(f)?, SpectrumScope::Full)
}

/// Spectrum of `n` rows drawn uniformly without replacement, kept in their
/// original order. Uses the full matrix when `n` covers every row.
pub fn subsample_report(f: &Matrix, n: usize, seed: u64) -> Result<SpectrumReport> {
    if n == 0 {
        return Err(Error::Config("subsample size must be >= 1".into()));
    }
    if n >= f.rows() {
        return spectrum_report(f);
    }
    let mut idx = Rng::new(seed).sample_indices(f.rows(), n);
    idx.sort_unstable();
    SpectrumReport::from_spectrum(&SingularSpectrum::of(&f.select_rows(&idx))?, SpectrumScope::Subsample)
}
