use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::metrics::{metrics, F1Average, MetricSet};
use super::SCHEMA_VERSION;
use crate::data::{inject_symmetric_noise, split, Dataset, NoiseSpec};
use crate::error::{Error, Result};
use crate::heads::{default_config, train, EpochRecord, HeadKind, HeadSpec, TrainConfig, TrainedHead};
use crate::losses::LossWeights;
use crate::rng::{Rng, STREAM_NOISE};
use crate::spectral::{SingularSpectrum, SpectrumReport, SpectrumScope};

/// Command-line style overrides applied on top of [`default_config`]. The
/// regularizer weights apply to NMTune heads only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub lambda_mse: Option<f64>,
    pub lambda_cov: Option<f64>,
    pub lambda_svd: Option<f64>,
}

impl Overrides {
    pub fn resolve(&self, kind: HeadKind, seed: u64) -> TrainConfig {
        let mut c = default_config(kind);
        c.seed = seed;
        c.epochs = self.epochs.unwrap_or(c.epochs);
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c.lr = self.lr.unwrap_or(c.lr);
        c.weight_decay = self.weight_decay.unwrap_or(c.weight_decay);
        if kind != HeadKind::Nmtune {
            // Only NMTune heads are regularized; keep the recorded weights honest.
            return c;
        }
        let w = c.loss_weights;
        c.loss_weights = LossWeights {
            lambda_mse: self.lambda_mse.unwrap_or(w.lambda_mse),
            lambda_cov: self.lambda_cov.unwrap_or(w.lambda_cov),
            lambda_svd: self.lambda_svd.unwrap_or(w.lambda_svd),
        };
        c
    }
}

/// Seeded stratified train/eval split shared by every run on a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: DEFAULT_TRAIN_FRACTION, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must be in (0, 1) so the eval split is non-empty, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    pub fn apply(&self, data: &Dataset) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        split(data, self.train_fraction, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub dim: usize,
    pub num_classes: usize,
    /// FNV-1a over the feature bits and labels; guards resumed sweeps
    /// against a changed input file.
    pub fingerprint: u64,
}

impl DatasetSummary {
    pub fn of(data: &Dataset) -> Self {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h = (h ^ u64::from(b)).wrapping_mul(PRIME);
            }
        };
        eat(&(data.len() as u64).to_le_bytes());
        eat(&(data.dim() as u64).to_le_bytes());
        eat(&(data.num_classes as u64).to_le_bytes());
        for v in data.features.as_slice() {
            eat(&v.to_bits().to_le_bytes());
        }
        for l in &data.labels {
            eat(&l.to_le_bytes());
        }
        Self { samples: data.len(), dim: data.dim(), num_classes: data.num_classes, fingerprint: h }
    }
}

/// Outcome of one training run, evaluated on the clean eval split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub head: HeadKind,
    pub noise_ratio: f64,
    pub seed: u64,
    pub train_samples: usize,
    pub eval_samples: usize,
    /// Training labels replaced by noise.
    pub flipped: usize,
    pub metrics: MetricSet,
    pub f1_average: F1Average,
    pub f1: f64,
    /// SVE and LSVR of Z over the full (noisy) training split.
    pub sve: f64,
    pub lsvr: f64,
    pub spectrum: SpectrumReport,
    pub svd_skipped_batches: usize,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
}

/// The label-noise seed used for a run with training seed `seed`.
pub fn noise_seed(seed: u64) -> u64 {
    Rng::stream(seed, STREAM_NOISE).next_u64()
}

/// Injects noise into `train_split` labels, trains, and evaluates on
/// `eval_split`. `config.seed` drives initialization, batching and the noise.
pub fn run_once(
    train_split: &Dataset,
    eval_split: &Dataset,
    head: HeadKind,
    noise_ratio: f64,
    config: &TrainConfig,
    f1_average: F1Average,
) -> Result<(TrainedHead, EvalReport)> {
    if eval_split.is_empty() {
        return Err(Error::EmptyEval);
    }
    if train_split.dim() != eval_split.dim() || train_split.num_classes != eval_split.num_classes {
        return Err(Error::Shape("train and eval splits disagree on dim or class count".into()));
    }
    let noisy = inject_symmetric_noise(
        &train_split.labels,
        train_split.num_classes,
        &NoiseSpec::symmetric(noise_ratio, noise_seed(config.seed)),
    )?;
    let spec = HeadSpec::new(head, train_split.dim(), train_split.num_classes);
    let trained = train(spec, &train_split.features, &noisy.labels, config)?;
    let predictions = trained.head.predict(&eval_split.features)?;
    let m = metrics(&predictions, &eval_split.labels, eval_split.num_classes)?;
    let (z, _) = trained.head.forward(&train_split.features)?;
    let spectrum = SpectrumReport::from_spectrum(&SingularSpectrum::of(&z)?, SpectrumScope::Full)?;
    let report = EvalReport {
        head,
        noise_ratio,
        seed: config.seed,
        train_samples: train_split.len(),
        eval_samples: eval_split.len(),
        flipped: noisy.flip_count(),
        f1: m.f1(f1_average),
        f1_average,
        metrics: m,
        sve: trained.final_sve,
        lsvr: trained.final_lsvr,
        spectrum,
        svd_skipped_batches: trained.svd_skipped_batches,
        config: trained.config.clone(),
        history: trained.history.clone(),
    };
    Ok((trained, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ratios: Vec<f64>,
    pub heads: Vec<HeadKind>,
    pub seeds: Vec<u64>,
    pub split: SplitSpec,
    pub overrides: Overrides,
    pub f1_average: F1Average,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() || self.heads.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("sweep grid needs at least one ratio, head and seed".into()));
        }
        for (i, r) in self.ratios.iter().enumerate() {
            if !(0.0..=1.0).contains(r) {
                return Err(Error::Config(format!("noise ratio {r} is outside [0, 1]")));
            }
            if self.ratios[..i].contains(r) {
                return Err(Error::Config(format!("noise ratio {r} listed twice")));
            }
        }
        for (i, h) in self.heads.iter().enumerate() {
            if self.heads[..i].contains(h) {
                return Err(Error::Config(format!("head {h} listed twice")));
            }
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(Error::Config(format!("seed {s} listed twice")));
            }
        }
        for &h in &self.heads {
            self.overrides.resolve(h, 0).validate()?;
        }
        self.split.validate()
    }

    /// Grid points in ratio-major, then head, then seed order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.ratios.len() * self.heads.len() * self.seeds.len());
        for &noise_ratio in &self.ratios {
            for &head in &self.heads {
                for &seed in &self.seeds {
                    out.push(GridPoint { index: out.len(), noise_ratio, head, seed });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub noise_ratio: f64,
    pub head: HeadKind,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellError {
    /// `usage`, `data` or `numeric`.
    pub kind: String,
    pub message: String,
}

impl From<&Error> for CellError {
    fn from(e: &Error) -> Self {
        Self { kind: e.kind().as_str().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    #[serde(flatten)]
    pub point: GridPoint,
    pub status: CellStatus,
    pub config: TrainConfig,
    pub report: Option<EvalReport>,
    pub error: Option<CellError>,
}

impl SweepCell {
    fn from_outcome(point: GridPoint, config: TrainConfig, outcome: Result<EvalReport>) -> Self {
        match outcome {
            Ok(report) => Self { point, status: CellStatus::Ok, config, report: Some(report), error: None },
            Err(e) => Self { point, status: CellStatus::Failed, config, report: None, error: Some((&e).into()) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub noise_ratio: f64,
    pub head: HeadKind,
    pub runs: usize,
    pub failed: usize,
    pub accuracy: Option<MeanStd>,
    pub macro_f1: Option<MeanStd>,
    pub mean_per_class: Option<MeanStd>,
    pub f1: Option<MeanStd>,
    pub sve: Option<MeanStd>,
    pub lsvr: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub dataset: DatasetSummary,
    pub spec: SweepSpec,
    pub cells: Vec<SweepCell>,
    pub aggregate: Vec<Aggregate>,
}

impl SweepResult {
    /// A document with no cells.
    pub fn empty(dataset: DatasetSummary, spec: SweepSpec) -> Self {
        Self { schema_version: SCHEMA_VERSION, dataset, spec, cells: Vec::new(), aggregate: Vec::new() }
    }
}

/// Mean ± std per (ratio, head), over successful cells, in grid order.
pub fn aggregate(spec: &SweepSpec, cells: &[SweepCell]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &noise_ratio in &spec.ratios {
        for &head in &spec.heads {
            let group: Vec<&SweepCell> = cells
                .iter()
                .filter(|c| c.point.noise_ratio == noise_ratio && c.point.head == head)
                .collect();
            let ok: Vec<&EvalReport> = group.iter().filter_map(|c| c.report.as_ref()).collect();
            let stat = |f: fn(&EvalReport) -> f64| MeanStd::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            out.push(Aggregate {
                noise_ratio,
                head,
                runs: group.len(),
                failed: group.len() - ok.len(),
                accuracy: stat(|r| r.metrics.accuracy),
                macro_f1: stat(|r| r.metrics.macro_f1),
                mean_per_class: stat(|r| r.metrics.mean_per_class),
                f1: stat(|r| r.f1),
                sve: stat(|r| r.sve),
                lsvr: stat(|r| r.lsvr),
            });
        }
    }
    out
}

/// Persistence for finished cells so an interrupted sweep can resume.
pub trait CellStore: Sync {
    /// A previously finished cell for `point` under `config`, if any.
    fn load(&self, point: &GridPoint, config: &TrainConfig) -> Option<SweepCell>;
    fn save(&self, cell: &SweepCell) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellRecord {
    schema_version: u32,
    dataset: DatasetSummary,
    split: SplitSpec,
    f1_average: F1Average,
    cell: SweepCell,
}

/// One JSON file per finished cell, `cell-NNNN.json`, written atomically.
/// A stored cell is reused only if the dataset, split and config all match.
#[derive(Debug, Clone)]
pub struct DirStore {
    dir: PathBuf,
    dataset: DatasetSummary,
    split: SplitSpec,
    f1_average: F1Average,
}

impl DirStore {
    pub fn new(dir: &Path, dataset: DatasetSummary, spec: &SweepSpec) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), dataset, split: spec.split, f1_average: spec.f1_average })
    }

    pub fn cell_path(&self, index: usize) -> PathBuf {
        self.dir.join(format!("cell-{index:04}.json"))
    }
}

impl CellStore for DirStore {
    fn load(&self, point: &GridPoint, config: &TrainConfig) -> Option<SweepCell> {
        let bytes = std::fs::read(self.cell_path(point.index)).ok()?;
        let rec: CellRecord = serde_json::from_slice(&bytes).ok()?;
        let fresh = rec.schema_version == SCHEMA_VERSION
            && rec.dataset == self.dataset
            && rec.split == self.split
            && rec.f1_average == self.f1_average
            && rec.cell.point == *point
            && rec.cell.config == *config;
        fresh.then_some(rec.cell)
    }

    fn save(&self, cell: &SweepCell) -> Result<()> {
        let rec = CellRecord {
            schema_version: SCHEMA_VERSION,
            dataset: self.dataset,
            split: self.split,
            f1_average: self.f1_average,
            cell: cell.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&rec)?;
        bytes.push(b'\n');
        crate::data::format::write_atomic(&self.cell_path(cell.point.index), &bytes)
    }
}

/// Runs every (ratio, head, seed) cell. Noise goes into the train split only;
/// evaluation uses the clean eval split. A failing cell is recorded with its
/// error and the sweep continues. With `jobs > 1` cells run on that many
/// threads; the result does not depend on `jobs`.
pub fn run_sweep(data: &Dataset, spec: &SweepSpec, jobs: usize, store: Option<&dyn CellStore>) -> Result<SweepResult> {
    spec.validate()?;
    let (train_split, eval_split) = spec.split.apply(data)?;
    let grid = spec.grid();
    let run = |point: &GridPoint| -> Result<SweepCell> {
        let config = spec.overrides.resolve(point.head, point.seed);
        if let Some(cell) = store.and_then(|s| s.load(point, &config)) {
            return Ok(cell);
        }
        let outcome = run_once(&train_split, &eval_split, point.head, point.noise_ratio, &config, spec.f1_average)
            .map(|(_, report)| report);
        let cell = SweepCell::from_outcome(*point, config, outcome);
        if let Some(s) = store {
            s.save(&cell)?;
        }
        Ok(cell)
    };

    let cells: Vec<SweepCell> = if jobs <= 1 || grid.len() <= 1 {
        grid.iter().map(run).collect::<Result<_>>()?
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<SweepCell>>>> = Mutex::new((0..grid.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(grid.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= grid.len() {
                        break;
                    }
                    let cell = run(&grid[i]);
                    slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(cell);
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|p| p.into_inner())
            .into_iter()
            .map(|c| c.expect("every grid index is claimed by a worker"))
            .collect::<Result<_>>()?
    };
    let aggregate = aggregate(spec, &cells);
    Ok(SweepResult { schema_version: SCHEMA_VERSION, dataset: DatasetSummary::of(data), spec: spec.clone(), cells, aggregate })
}
