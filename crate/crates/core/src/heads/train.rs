use serde::{Deserialize, Serialize};

use super::model::{Head, HeadKind, HeadSpec};
use super::optim::{adamw_step, AdamHyper, Moments, Schedule};
use crate::error::{Error, Result};
use crate::losses::{evaluate, LossValue, LossWeights, RegularizerOptions};
use crate::rng::{Rng, STREAM_DIAGNOSTIC, STREAM_INIT, STREAM_SHUFFLE};
use crate::spectral::{largest_singular_value_ratio, singular_value_entropy};
use crate::tensor::{singular_values, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub schedule: Schedule,
    pub loss_weights: LossWeights,
    pub seed: u64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub regularizer: RegularizerOptions,
    /// Rows used for the per-epoch SVE/LSVR trail; 0 disables it.
    pub diagnostic_rows: usize,
}

pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_BATCH_SIZE: usize = 256;
pub const DEFAULT_DIAGNOSTIC_ROWS: usize = 2048;
/// Regularizer weight for every NMTune term.
pub const NMTUNE_LAMBDA: f64 = 0.01;

/// Training protocol per head: the linear probe uses lr 0.1 without weight
/// decay; MLP and NMTune heads use lr 0.001 with weight decay 1e-4. All run
/// 30 epochs of AdamW under a cosine schedule.
pub fn default_config(kind: HeadKind) -> TrainConfig {
    let (lr, weight_decay, loss_weights) = match kind {
        HeadKind::LinearProbe => (0.1, 0.0, LossWeights::zero()),
        HeadKind::Mlp => (0.001, 1e-4, LossWeights::zero()),
        HeadKind::Nmtune => (0.001, 1e-4, LossWeights::uniform(NMTUNE_LAMBDA)),
    };
    TrainConfig {
        epochs: DEFAULT_EPOCHS,
        batch_size: DEFAULT_BATCH_SIZE,
        lr,
        weight_decay,
        schedule: Schedule::Cosine,
        loss_weights,
        seed: 0,
        betas: (0.9, 0.999),
        eps: 1e-8,
        regularizer: RegularizerOptions::default(),
        diagnostic_rows: DEFAULT_DIAGNOSTIC_ROWS,
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch_size must be >= 2, got {}", self.batch_size)));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::Config(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        self.loss_weights.validate()
    }

    fn adam(&self) -> AdamHyper {
        AdamHyper {
            beta1: self.betas.0,
            beta2: self.betas.1,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// Weights that actually drive the gradient: only NMTune heads are
/// regularized.
pub fn effective_weights(kind: HeadKind, config: &TrainConfig) -> LossWeights {
    match kind {
        HeadKind::Nmtune => config.loss_weights,
        HeadKind::LinearProbe | HeadKind::Mlp => LossWeights::zero(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's batches.
    pub loss: LossValue,
    pub train_accuracy: f64,
    pub lr_last: f64,
    /// Spectrum of Z on the diagnostic subsample after the epoch.
    pub sve: Option<f64>,
    pub lsvr: Option<f64>,
    pub svd_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedHead {
    pub head: Head,
    pub history: Vec<EpochRecord>,
    pub config: TrainConfig,
    /// SVE and LSVR of Z over the full training matrix.
    pub final_sve: f64,
    pub final_lsvr: f64,
    pub svd_skipped_batches: usize,
}

/// Trains a head on `features`/`labels`.
///
/// Initialization, per-epoch shuffling and the diagnostic subsample each draw
/// from their own stream of `config.seed`, so a run is a pure function of its
/// inputs. Batches are consecutive slices of the shuffled order; a final
/// batch with fewer than 2 rows is dropped.
pub fn train(spec: HeadSpec, features: &Matrix, labels: &[u32], config: &TrainConfig) -> Result<TrainedHead> {
    config.validate()?;
    spec.validate()?;
    let n = features.rows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} feature rows", labels.len())));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples(n));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= spec.num_classes) {
        return Err(Error::Label { index, label, num_classes: spec.num_classes });
    }

    let weights = effective_weights(spec.kind, config);
    let hp = config.adam();
    let mut head = Head::init(spec, &mut Rng::stream(config.seed, STREAM_INIT))?;
    let mut moments: Vec<Moments> = head.tensors().iter().map(|t| Moments::new(t.len())).collect();
    let mut shuffler = Rng::stream(config.seed, STREAM_SHUFFLE);
    let diagnostic = diagnostic_rows(n, config);
    let diag_features = diagnostic.as_ref().map(|idx| features.select_rows(idx));

    let batches_per_epoch = {
        let full = n / config.batch_size;
        let rem = n % config.batch_size;
        full + usize::from(rem >= 2)
    };
    let total_steps = (config.epochs * batches_per_epoch) as u64;
    let mut step: u64 = 0;
    let mut history = Vec::with_capacity(config.epochs);
    let mut skipped_total = 0;
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        shuffler.shuffle(&mut order);
        let mut sum = LossValue::default();
        let mut correct = 0usize;
        let mut seen = 0usize;
        let mut skipped = 0usize;
        let mut lr = config.lr;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            if idx.len() < 2 {
                continue;
            }
            let f = features.select_rows(idx);
            let y: Vec<u32> = idx.iter().map(|&i| labels[i]).collect();
            let cache = head.forward_cached(&f)?;
            if !cache.logits.is_finite() || !cache.z.is_finite() {
                return Err(Error::Divergence { epoch, batch });
            }
            let eval = evaluate(&f, &cache.z, &cache.logits, &y, &weights, &config.regularizer, true)?;
            if !eval.value.total.is_finite() {
                return Err(Error::Divergence { epoch, batch });
            }
            skipped += usize::from(eval.svd_skipped);
            correct += count_correct(&cache.logits, &y);
            seen += y.len();
            accumulate(&mut sum, &eval.value);

            let grads = head.backward(&cache, &eval.grad.logits, &eval.grad.z)?;
            let grad_tensors: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
            lr = config.schedule.lr(step, total_steps, config.lr);
            step += 1;
            for (((params, decay), g), state) in head
                .tensors_mut()
                .into_iter()
                .zip(&grad_tensors)
                .zip(moments.iter_mut())
            {
                adamw_step(params, g, state, step, lr, &hp, decay);
            }
        }
        if !head.is_finite() {
            return Err(Error::Divergence { epoch, batch: batches_per_epoch.saturating_sub(1) });
        }
        let batches = batches_per_epoch.max(1) as f64;
        let loss = LossValue {
            total: sum.total / batches,
            ce: sum.ce / batches,
            mse: sum.mse / batches,
            cov: sum.cov / batches,
            svd: sum.svd / batches,
        };
        let (sve, lsvr) = match &diag_features {
            Some(df) => {
                let (z, _) = head.forward(df)?;
                match spectrum_pair(&z) {
                    Ok((s, l)) => (Some(s), Some(l)),
                    Err(_) => (None, None),
                }
            }
            None => (None, None),
        };
        skipped_total += skipped;
        history.push(EpochRecord {
            epoch,
            loss,
            train_accuracy: correct as f64 / seen.max(1) as f64,
            lr_last: lr,
            sve,
            lsvr,
            svd_skipped: skipped,
        });
    }

    let (z, _) = head.forward(features)?;
    let (final_sve, final_lsvr) = spectrum_pair(&z)?;
    Ok(TrainedHead {
        head,
        history,
        config: config.clone(),
        final_sve,
        final_lsvr,
        svd_skipped_batches: skipped_total,
    })
}

/// SVE and LSVR of a matrix's singular values.
pub fn spectrum_pair(z: &Matrix) -> Result<(f64, f64)> {
    let sigma = singular_values(z)?;
    Ok((singular_value_entropy(&sigma)?, largest_singular_value_ratio(&sigma)?))
}

fn diagnostic_rows(n: usize, config: &TrainConfig) -> Option<Vec<usize>> {
    if config.diagnostic_rows == 0 {
        return None;
    }
    if n <= config.diagnostic_rows {
        return Some((0..n).collect());
    }
    let mut idx = Rng::stream(config.seed, STREAM_DIAGNOSTIC).sample_indices(n, config.diagnostic_rows);
    idx.sort_unstable();
    Some(idx)
}

fn accumulate(sum: &mut LossValue, v: &LossValue) {
    sum.total += v.total;
    sum.ce += v.ce;
    sum.mse += v.mse;
    sum.cov += v.cov;
    sum.svd += v.svd;
}

fn count_correct(logits: &Matrix, labels: &[u32]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|(i, &y)| {
            let row = logits.row(*i);
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best == y as usize
        })
        .count()
}
