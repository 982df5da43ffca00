use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sweep::{DatasetSummary, EvalReport, SplitSpec, SweepResult};
use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::spectral::SpectrumReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Usage(format!("unknown report format '{other}' (expected json or csv)"))),
        }
    }
}

/// Report of a single `train` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    pub dataset: DatasetSummary,
    pub split: SplitSpec,
    pub report: EvalReport,
}

impl TrainReport {
    pub fn new(dataset: DatasetSummary, split: SplitSpec, report: EvalReport) -> Self {
        Self { schema_version: SCHEMA_VERSION, dataset, split, report }
    }
}

/// Report of an `analyze` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub spectrum: SpectrumReport,
}

impl AnalyzeReport {
    pub fn new(spectrum: SpectrumReport) -> Self {
        Self { schema_version: SCHEMA_VERSION, spectrum }
    }
}

/// Pretty JSON with a trailing newline. Field order follows declaration
/// order, so equal values always give equal bytes.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn emit_report(result: &SweepResult, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => to_json(result),
        ReportFormat::Csv => sweep_csv(result),
    }
}

/// Parses a JSON sweep report, rejecting other schema versions.
pub fn parse_report(bytes: &[u8]) -> Result<SweepResult> {
    let result: SweepResult = serde_json::from_slice(bytes)?;
    if result.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "report schema version {} is not supported (expected {SCHEMA_VERSION})",
            result.schema_version
        )));
    }
    Ok(result)
}

pub const CSV_COLUMNS: [&str; 24] = [
    "index",
    "noise_ratio",
    "head",
    "seed",
    "status",
    "accuracy",
    "macro_f1",
    "mean_per_class",
    "f1_average",
    "f1",
    "sve",
    "lsvr",
    "flipped",
    "train_samples",
    "eval_samples",
    "epochs",
    "batch_size",
    "lr",
    "weight_decay",
    "schedule",
    "lambda_mse",
    "lambda_cov",
    "lambda_svd",
    "error",
];

/// One row per cell. Floats use the shortest representation that parses
/// back to the same value.
fn sweep_csv(result: &SweepResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for cell in &result.cells {
        let c = &cell.config;
        let r = cell.report.as_ref();
        let num = |f: fn(&EvalReport) -> String| r.map(f).unwrap_or_default();
        let status = match cell.status {
            super::sweep::CellStatus::Ok => "ok",
            super::sweep::CellStatus::Failed => "failed",
        };
        let schedule = serde_json::to_value(c.schedule)?.as_str().unwrap_or_default().to_string();
        let f1_average = serde_json::to_value(result.spec.f1_average)?.as_str().unwrap_or_default().to_string();
        w.write_record([
            cell.point.index.to_string(),
            cell.point.noise_ratio.to_string(),
            cell.point.head.as_str().to_string(),
            cell.point.seed.to_string(),
            status.to_string(),
            num(|r| r.metrics.accuracy.to_string()),
            num(|r| r.metrics.macro_f1.to_string()),
            num(|r| r.metrics.mean_per_class.to_string()),
            f1_average,
            num(|r| r.f1.to_string()),
            num(|r| r.sve.to_string()),
            num(|r| r.lsvr.to_string()),
            num(|r| r.flipped.to_string()),
            num(|r| r.train_samples.to_string()),
            num(|r| r.eval_samples.to_string()),
            c.epochs.to_string(),
            c.batch_size.to_string(),
            c.lr.to_string(),
            c.weight_decay.to_string(),
            schedule,
            c.loss_weights.lambda_mse.to_string(),
            c.loss_weights.lambda_cov.to_string(),
            c.loss_weights.lambda_svd.to_string(),
            cell.error.as_ref().map(|e| format!("{}: {}", e.kind, e.message)).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))
}

/// `rank,sigma,group` rows with group `head` (ranks 1-20), `body` (21-500)
/// or `tail`, for external plotting.
pub fn spectrum_csv(report: &SpectrumReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "sigma", "group"]).map_err(csv_err)?;
    let g = &report.groups;
    let groups = [("head", &g.head), ("body", &g.body), ("tail", &g.tail)];
    let mut rank = 0usize;
    for (name, values) in groups {
        for s in values.iter() {
            rank += 1;
            w.write_record([rank.to_string(), s.to_string(), name.to_string()]).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}
