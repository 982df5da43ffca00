use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nmtune::heads::HeadKind;
use nmtune::report::{F1Average, Overrides, SplitSpec, DEFAULT_TRAIN_FRACTION};

#[derive(Debug, Parser)]
#[command(name = "nmtune", version, about = "Spectral diagnostics and regularized tuning heads for frozen features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// SVE, LSVR and the grouped singular spectrum of a feature file.
    Analyze(AnalyzeArgs),
    /// Train one head and evaluate it on a held-out split.
    Train(TrainArgs),
    /// Train every (noise ratio, head, seed) combination.
    Sweep(SweepArgs),
    /// Write a synthetic Gaussian-mixture feature file.
    Synth(SynthArgs),
    /// Write a copy of a labeled file with symmetric label noise.
    InjectNoise(InjectArgs),
    /// Check a feature file's header, payload and labels.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Analyze N rows drawn without replacement instead of the full matrix.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `json` (full report) or `csv` (rank, sigma, group rows).
    #[arg(long, default_value = "json")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub wd: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lambda_mse: Option<f64>,
    #[arg(long)]
    pub lambda_cov: Option<f64>,
    #[arg(long)]
    pub lambda_svd: Option<f64>,
}

impl HyperArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            epochs: self.epochs,
            batch_size: self.batch,
            lr: self.lr,
            weight_decay: self.wd,
            lambda_mse: self.lambda_mse,
            lambda_cov: self.lambda_cov,
            lambda_svd: self.lambda_svd,
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Stratified share of each class used for training; the rest is the
    /// clean eval split.
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// `macro`, `micro` or `weighted`; reported as `f1`.
    #[arg(long, default_value = "macro", value_parser = parse_f1)]
    pub f1: F1Average,
}

impl SplitArgs {
    pub fn split(&self) -> SplitSpec {
        SplitSpec { train_fraction: self.train_fraction, seed: self.split_seed }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// `lp`, `mlp` or `nmtune`.
    #[arg(long)]
    pub head: HeadKind,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Symmetric label noise applied to the training split.
    #[arg(long, default_value_t = 0.0)]
    pub noise_ratio: f64,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Directory for `head.nmck` and `report.json`; without it the report
    /// goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub heads: Vec<HeadKind>,
    /// Number of seeds; cells use seeds `seed-base .. seed-base + N`.
    #[arg(long)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Worker threads; the report does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Directory for `sweep.json`, `sweep.csv` and resumable `cells/`;
    /// without it the report goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format written to standard output when `--out` is absent.
    #[arg(long, default_value = "json")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = nmtune::data::DEFAULT_CENTER_SCALE)]
    pub center_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// The flip mask is written next to it as `<out>.flips.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub features: PathBuf,
}

fn parse_f1(s: &str) -> Result<F1Average, String> {
    match s {
        "macro" => Ok(F1Average::Macro),
        "micro" => Ok(F1Average::Micro),
        "weighted" => Ok(F1Average::Weighted),
        other => Err(format!("unknown F1 averaging '{other}'")),
    }
}
