//! Feature files, labeled datasets, label noise, synthetic data and splits.

pub mod format;
mod mixture;
mod noise;
mod split;

pub use format::{read_features, write_features, FeatureFile};
pub use mixture::{make_mixture, MixtureSpec, DEFAULT_CENTER_SCALE};
pub use noise::{inject_symmetric_noise, NoiseKind, NoiseSpec, NoisyLabels};
pub use split::{split, stratified_subsample};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Labeled feature matrix held in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u32>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<u32>, num_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), features.rows())));
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= num_classes) {
            return Err(Error::Label { index, label, num_classes });
        }
        Ok(Self { features, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn with_labels(&self, labels: Vec<u32>) -> Result<Self> {
        Self::new(self.features.clone(), labels, self.num_classes)
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Requires a labeled file.
    pub fn from_file(file: &FeatureFile) -> Result<Self> {
        let labels = file
            .labels
            .clone()
            .ok_or_else(|| Error::Validation("feature file has no labels".into()))?;
        Self::new(features_matrix(file)?, labels, file.num_classes as usize)
    }

    /// Stores features as `f32`; exact when the values came from a file or
    /// from [`make_mixture`].
    pub fn to_file(&self) -> Result<FeatureFile> {
        FeatureFile::new(
            self.len(),
            self.dim(),
            self.features.as_slice().iter().map(|&v| v as f32).collect(),
            Some((self.labels.clone(), self.num_classes as u32)),
        )
    }
}

/// Widens the stored `f32` features to an `f64` matrix.
pub fn features_matrix(file: &FeatureFile) -> Result<Matrix> {
    Matrix::new(
        file.rows as usize,
        file.dim as usize,
        file.features.iter().map(|&v| f64::from(v)).collect(),
    )
}
