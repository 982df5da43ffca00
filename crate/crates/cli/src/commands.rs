use std::io::Write;
use std::path::{Path, PathBuf};

use nmtune::data::format::{encode, write_atomic};
use nmtune::data::{
    features_matrix, inject_symmetric_noise, make_mixture, read_features, write_features, Dataset, FeatureFile,
    MixtureSpec, NoiseSpec,
};
use nmtune::heads::checkpoint;
use nmtune::report::{
    emit_report, run_once, run_sweep, spectrum_csv, to_json, AnalyzeReport, CellStore, DatasetSummary, DirStore,
    ReportFormat, SweepSpec, TrainReport,
};
use nmtune::spectral::subsample_report;
use nmtune::{Error, Result};
use serde::Serialize;

use crate::args::{AnalyzeArgs, InjectArgs, SweepArgs, SynthArgs, TrainArgs, ValidateArgs};

/// Writes to `out` atomically, or to standard output.
fn deliver(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_labeled(path: &Path) -> Result<Dataset> {
    Dataset::from_file(&read_features(path)?)
}

pub fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse()?;
    let file = read_features(&a.features)?;
    let f = features_matrix(&file)?;
    let report = subsample_report(&f, a.subsample.unwrap_or(f.rows()), a.seed)?;
    let bytes = match format {
        ReportFormat::Json => to_json(&AnalyzeReport::new(report))?,
        ReportFormat::Csv => spectrum_csv(&report)?,
    };
    deliver(a.out.as_deref(), &bytes)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let data = load_labeled(&a.features)?;
    let split = a.split.split();
    let (train_split, eval_split) = split.apply(&data)?;
    let config = a.hyper.overrides().resolve(a.head, a.seed);
    let (trained, report) = run_once(&train_split, &eval_split, a.head, a.noise_ratio, &config, a.split.f1)?;
    let doc = to_json(&TrainReport::new(DatasetSummary::of(&data), split, report))?;
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            checkpoint::save(&dir.join("head.nmck"), &trained.head)?;
            write_atomic(&dir.join("report.json"), &doc)
        }
        None => deliver(None, &doc),
    }
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse()?;
    if a.seeds == 0 {
        return Err(Error::Config("--seeds must be >= 1".into()));
    }
    let seeds = (0..a.seeds as u64)
        .map(|i| a.seed_base.checked_add(i).ok_or_else(|| Error::Config("seed range overflows u64".into())))
        .collect::<Result<Vec<_>>>()?;
    let spec = SweepSpec {
        ratios: a.ratios.clone(),
        heads: a.heads.clone(),
        seeds,
        split: a.split.split(),
        overrides: a.hyper.overrides(),
        f1_average: a.split.f1,
    };
    // Reject a malformed grid before touching the data file.
    spec.validate()?;
    let data = load_labeled(&a.features)?;
    match &a.out {
        Some(dir) => {
            let store = DirStore::new(&dir.join("cells"), DatasetSummary::of(&data), &spec)?;
            let result = run_sweep(&data, &spec, a.jobs, Some(&store as &dyn CellStore))?;
            write_atomic(&dir.join("sweep.json"), &emit_report(&result, ReportFormat::Json)?)?;
            write_atomic(&dir.join("sweep.csv"), &emit_report(&result, ReportFormat::Csv)?)
        }
        None => {
            let result = run_sweep(&data, &spec, a.jobs, None)?;
            deliver(None, &emit_report(&result, format)?)
        }
    }
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = MixtureSpec {
        num_classes: a.classes,
        dim: a.dim,
        per_class: a.per_class,
        center_scale: a.center_scale,
        noise_sigma: a.sigma,
        seed: a.seed,
    };
    write_features(&a.out, &make_mixture(&spec)?.to_file()?)
}

/// Flip mask written next to a noisy copy.
#[derive(Debug, Serialize)]
struct FlipSidecar {
    schema_version: u32,
    ratio: f64,
    seed: u64,
    num_classes: u32,
    samples: u64,
    flipped: usize,
    /// Indices whose label changed, ascending.
    indices: Vec<usize>,
    /// Labels at `indices` before the flip.
    original: Vec<u32>,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".flips.json");
    out.with_file_name(name)
}

pub fn inject_noise(a: &InjectArgs) -> Result<()> {
    let file = read_features(&a.features)?;
    let labels = file
        .labels
        .as_ref()
        .ok_or_else(|| Error::Validation("feature file has no labels".into()))?;
    if !(0.0..=1.0).contains(&a.ratio) {
        return Err(Error::Config(format!("--ratio must be in [0, 1], got {}", a.ratio)));
    }
    let noisy = inject_symmetric_noise(labels, file.num_classes as usize, &NoiseSpec::symmetric(a.ratio, a.seed))?;
    let indices = noisy.flipped_indices();
    let sidecar = FlipSidecar {
        schema_version: nmtune::report::SCHEMA_VERSION,
        ratio: a.ratio,
        seed: a.seed,
        num_classes: file.num_classes,
        samples: file.rows,
        flipped: indices.len(),
        original: indices.iter().map(|&i| labels[i]).collect(),
        indices,
    };
    let out = FeatureFile { labels: Some(noisy.labels), ..file };
    write_atomic(&a.out, &encode(&out))?;
    write_atomic(&sidecar_path(&a.out), &to_json(&sidecar)?)
}

#[derive(Debug, Serialize)]
struct ValidateSummary {
    valid: bool,
    rows: u64,
    dim: u64,
    num_classes: u32,
    labeled: bool,
    bytes: u64,
}

pub fn validate(a: &ValidateArgs) -> Result<()> {
    let file = read_features(&a.features)?;
    let summary = ValidateSummary {
        valid: true,
        rows: file.rows,
        dim: file.dim,
        num_classes: file.num_classes,
        labeled: file.labels.is_some(),
        bytes: file.encoded_len(),
    };
    deliver(None, &to_json(&summary)?)
}
