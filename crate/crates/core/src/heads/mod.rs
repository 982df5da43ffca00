//! Tuning heads, the optimizer, and the training loop.

pub mod checkpoint;
mod model;
mod optim;
mod train;

pub use model::{Activation, Dense, ForwardCache, Head, HeadGrads, HeadKind, HeadSpec};
pub use optim::{adamw_step, cosine_lr, AdamHyper, Moments, Schedule};
pub use train::{
    default_config, effective_weights, spectrum_pair, train, EpochRecord, TrainConfig, TrainedHead,
    DEFAULT_BATCH_SIZE, DEFAULT_DIAGNOSTIC_ROWS, DEFAULT_EPOCHS, NMTUNE_LAMBDA,
};
