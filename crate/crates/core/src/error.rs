use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("svd did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(&'static str),

    #[error("degenerate top singular pair (sigma1 = {sigma1:e}, sigma2 = {sigma2:e}); gradient undefined")]
    DegenerateGradient { sigma1: f64, sigma2: f64 },

    #[error("row {0} has zero norm and cannot be normalized")]
    ZeroNorm(usize),

    #[error("label {label} at index {index} is out of range for {num_classes} classes")]
    Label {
        index: usize,
        label: u32,
        num_classes: usize,
    },

    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("label noise needs at least 2 classes, got {0}")]
    NoiseImpossible(usize),

    #[error("class {class} has {count} sample(s); stratified split needs at least 2")]
    Stratification { class: u32, count: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, data ends at byte offset {actual}")]
    Length { expected: u64, actual: u64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("cannot evaluate an empty prediction set")]
    EmptyEval,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Usage(_) => ErrorKind::Usage,
            Error::NoConvergence { .. }
            | Error::DegenerateSpectrum(_)
            | Error::DegenerateGradient { .. }
            | Error::ZeroNorm(_)
            | Error::Divergence { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
