use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Average {
    #[default]
    Macro,
    Micro,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Mean recall over classes that occur in the labels.
    pub mean_per_class: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

impl MetricSet {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn support(&self) -> Vec<u64> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }

    /// F1 under the requested averaging. Micro-F1 equals accuracy for
    /// single-label predictions.
    pub fn f1(&self, average: F1Average) -> f64 {
        match average {
            F1Average::Macro => self.macro_f1,
            F1Average::Micro => self.accuracy,
            F1Average::Weighted => {
                let support = self.support();
                let total: u64 = support.iter().sum();
                if total == 0 {
                    return 0.0;
                }
                self.per_class_f1.iter().zip(&support).map(|(f, &s)| f * s as f64).sum::<f64>() / total as f64
            }
        }
    }
}

/// Accuracy, macro-F1 and mean per-class recall from aligned predictions and
/// labels. A class with no true and no predicted samples has F1 = 0.
pub fn metrics(predictions: &[u32], labels: &[u32], num_classes: usize) -> Result<MetricSet> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyEval);
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (i, (&p, &y)) in predictions.iter().zip(labels).enumerate() {
        for v in [y, p] {
            if v as usize >= num_classes {
                return Err(Error::Label { index: i, label: v, num_classes });
            }
        }
        confusion[y as usize][p as usize] += 1;
    }
    let total = labels.len() as f64;
    let trace: u64 = (0..num_classes).map(|c| confusion[c][c]).sum();
    let mut per_class_f1 = Vec::with_capacity(num_classes);
    let mut recalls = Vec::new();
    for c in 0..num_classes {
        let tp = confusion[c][c];
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
        let fn_ = support - tp;
        let fp = predicted - tp;
        let denom = 2 * tp + fp + fn_;
        per_class_f1.push(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 });
        if support > 0 {
            recalls.push(tp as f64 / support as f64);
        }
    }
    Ok(MetricSet {
        accuracy: trace as f64 / total,
        macro_f1: per_class_f1.iter().sum::<f64>() / num_classes.max(1) as f64,
        mean_per_class: recalls.iter().sum::<f64>() / recalls.len() as f64,
        per_class_f1,
        confusion,
    })
}
