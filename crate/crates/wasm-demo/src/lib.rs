//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and run natively too; the `#[wasm_bindgen]` wrappers only turn errors into
//! JavaScript exceptions.

use nmtune::data::{make_mixture, Dataset, MixtureSpec};
use nmtune::heads::HeadKind;
use nmtune::report::{run_once, to_json, F1Average, Overrides, SplitSpec};
use nmtune::spectral::{largest_singular_value_ratio, singular_value_entropy, spectrum_report, SpectrumGroups};
use nmtune::tensor::singular_values;
use nmtune::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest mixture the page will build, to keep the tab responsive.
pub const MAX_ROWS: usize = 5_000;
pub const MAX_DIM: usize = 128;

fn json<T: Serialize>(value: &T) -> Result<String> {
    String::from_utf8(to_json(value)?).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Serialize)]
struct SpectrumView {
    sigma: Vec<f64>,
    p: Vec<f64>,
    sve: f64,
    lsvr: f64,
    ln_r: f64,
}

/// SVE and LSVR of a user-typed list of singular values (any order; sorted
/// descending here).
pub fn spectrum_json(values: &[f64]) -> Result<String> {
    let mut sigma = values.to_vec();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let sve = singular_value_entropy(&sigma)?;
    let lsvr = largest_singular_value_ratio(&sigma)?;
    let total: f64 = sigma.iter().sum();
    json(&SpectrumView {
        p: sigma.iter().map(|s| s / total).collect(),
        ln_r: (sigma.len() as f64).ln(),
        sigma,
        sve,
        lsvr,
    })
}

fn mixture(classes: usize, dim: usize, per_class: usize, center_scale: f64, sigma: f64, seed: u64) -> Result<Dataset> {
    if classes.saturating_mul(per_class) > MAX_ROWS || dim > MAX_DIM {
        return Err(Error::Config(format!("demo limits: at most {MAX_ROWS} rows and {MAX_DIM} dims")));
    }
    make_mixture(&MixtureSpec { num_classes: classes, dim, per_class, center_scale, noise_sigma: sigma, seed })
}

#[derive(Debug, Serialize)]
struct MixtureView {
    rows: usize,
    dim: usize,
    sve: f64,
    lsvr: f64,
    ln_d: f64,
    groups: SpectrumGroups,
}

/// Singular spectrum of a synthetic Gaussian mixture.
pub fn mixture_spectrum_json(
    classes: usize,
    dim: usize,
    per_class: usize,
    center_scale: f64,
    sigma: f64,
    seed: u64,
) -> Result<String> {
    let data = mixture(classes, dim, per_class, center_scale, sigma, seed)?;
    let r = spectrum_report(&data.features)?;
    json(&MixtureView { rows: data.len(), dim, sve: r.sve, lsvr: r.lsvr, ln_d: (dim as f64).ln(), groups: r.groups })
}

#[derive(Debug, Serialize)]
struct HeadView {
    head: HeadKind,
    accuracy: f64,
    macro_f1: f64,
    sve: f64,
    lsvr: f64,
    top_ratio: f64,
    sigma: Vec<f64>,
    loss: Vec<f64>,
    epoch_sve: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
struct CompareView {
    train_samples: usize,
    eval_samples: usize,
    flipped: usize,
    heads: Vec<HeadView>,
}

/// Knobs for [`compare_heads_json`].
#[derive(Debug, Clone, Copy)]
pub struct CompareSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub sigma: f64,
    pub seed: u64,
    pub noise_ratio: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lambda_mse: f64,
    pub lambda_cov: f64,
    pub lambda_svd: f64,
}

/// Trains a linear probe, a plain MLP head, and an NMTune head with the given
/// regularizer weights on the same noisy mixture split, then reports eval
/// accuracy and the spectrum of each head's Z.
pub fn compare_heads_json(s: &CompareSpec) -> Result<String> {
    let data = mixture(s.classes, s.dim, s.per_class, nmtune::data::DEFAULT_CENTER_SCALE, s.sigma, s.seed)?;
    let (train, eval) = SplitSpec::default().apply(&data)?;
    let mut heads = Vec::new();
    let mut flipped = 0;
    for kind in HeadKind::ALL {
        let overrides = Overrides {
            epochs: Some(s.epochs),
            batch_size: Some(s.batch),
            lambda_mse: Some(s.lambda_mse),
            lambda_cov: Some(s.lambda_cov),
            lambda_svd: Some(s.lambda_svd),
            ..Default::default()
        };
        let config = overrides.resolve(kind, s.seed);
        let (trained, report) = run_once(&train, &eval, kind, s.noise_ratio, &config, F1Average::Macro)?;
        let (z, _) = trained.head.forward(&train.features)?;
        let sigma = singular_values(&z)?;
        flipped = report.flipped;
        heads.push(HeadView {
            head: kind,
            accuracy: report.metrics.accuracy,
            macro_f1: report.metrics.macro_f1,
            sve: report.sve,
            lsvr: report.lsvr,
            top_ratio: sigma[0] / sigma.iter().sum::<f64>(),
            sigma,
            loss: trained.history.iter().map(|h| h.loss.total).collect(),
            epoch_sve: trained.history.iter().map(|h| h.sve).collect(),
        });
    }
    json(&CompareView { train_samples: train.len(), eval_samples: eval.len(), flipped, heads })
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn spectrum(values: Vec<f64>) -> std::result::Result<String, JsError> {
    js(spectrum_json(&values))
}

#[wasm_bindgen]
pub fn mixture_spectrum(
    classes: usize,
    dim: usize,
    per_class: usize,
    center_scale: f64,
    sigma: f64,
    seed: u32,
) -> std::result::Result<String, JsError> {
    js(mixture_spectrum_json(classes, dim, per_class, center_scale, sigma, u64::from(seed)))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn compare_heads(
    classes: usize,
    dim: usize,
    per_class: usize,
    sigma: f64,
    seed: u32,
    noise_ratio: f64,
    epochs: usize,
    batch: usize,
    lambda_mse: f64,
    lambda_cov: f64,
    lambda_svd: f64,
) -> std::result::Result<String, JsError> {
    js(compare_heads_json(&CompareSpec {
        classes,
        dim,
        per_class,
        sigma,
        seed: u64::from(seed),
        noise_ratio,
        epochs,
        batch,
        lambda_mse,
        lambda_cov,
        lambda_svd,
    }))
}
