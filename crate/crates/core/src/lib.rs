//! Spectral diagnostics and regularized tuning heads for frozen features.
//!
//! Given a feature matrix extracted by some black-box model, this crate
//! measures how its singular spectrum is spread ([`spectral`]), trains a
//! linear probe, a plain MLP head, or an MLP head regularized toward a
//! decorrelated, feature-consistent space with a dominant leading direction
//! ([`heads`], [`losses`]), and runs seeded label-noise sweeps over those
//! heads ([`report`]). Feature files use the little-endian NMFT container in
//! [`data::format`].

pub mod data;
pub mod error;
pub mod heads;
pub mod losses;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod tensor;

pub use error::{Error, ErrorKind, Result};
pub use tensor::Matrix;
