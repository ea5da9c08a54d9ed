use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("sequencing error at row {row}: frame {got} does not follow frame {previous}")]
    Sequencing { row: usize, previous: u64, got: u64 },

    #[error("value {value} out of range for `{column}` at row {row} (expected {expected})")]
    Range {
        row: usize,
        column: String,
        value: f64,
        expected: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("frame rate mismatch: {0}")]
    RateMismatch(String),

    #[error("missing channel: {0}")]
    MissingChannel(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("insufficient data: need at least {needed} frames, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("shape mismatch: expected width {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Divergence { epoch: usize },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error: 4 for numeric failures, 3 for
    /// everything data or I/O related.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::Undefined(_) => 4,
            _ => 3,
        }
    }
}
