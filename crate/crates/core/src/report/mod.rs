//! Classification metrics, noise sweeps over heads, and report output.

mod emit;
mod metrics;
mod sweep;

pub use emit::{emit_report, parse_report, spectrum_csv, to_json, AnalyzeReport, ReportFormat, TrainReport, CSV_COLUMNS};
pub use metrics::{metrics, F1Average, MetricSet};
pub use sweep::{
    aggregate, noise_seed, run_once, run_sweep, Aggregate, CellError, CellStatus, CellStore, DatasetSummary, DirStore,
    EvalReport, GridPoint, MeanStd, Overrides, SplitSpec, SweepCell, SweepResult, SweepSpec, DEFAULT_TRAIN_FRACTION,
};

/// Version of every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
