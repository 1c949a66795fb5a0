use thiserror::Error;

/// Errors surfaced by the numeric kernel, the model, and the data pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("degenerate norm in {op}: |x| = {norm} <= {eps}")]
    DegenerateNorm { op: &'static str, norm: f64, eps: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("backward requires a scalar loss node, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error at line {line}: {detail}")]
    Format { line: usize, detail: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged { epoch: usize, batch: usize, detail: String },

    #[error("incompatible artifact: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }
}
