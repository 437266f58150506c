//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used for process exit codes and the C error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    // ingestion / tables
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unparseable datetime `{value}` at data row {row}")]
    BadDatetime { row: usize, value: String },
    #[error("file `{0}` has no data")]
    EmptyFile(PathBuf),
    #[error("file `{0}` does not exist")]
    MissingFile(PathBuf),
    #[error("column `{0}` appears in more than one table")]
    DuplicateColumn(String),
    #[error("no rows fall inside the requested span")]
    EmptySpan,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("table is not a contiguous hourly series (row {0})")]
    NotHourly(usize),

    // fetcher
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("request timed out")]
    Timeout,
    #[error("network access is disabled (set GAPCAST_NETWORK=1)")]
    NetworkDisabled,
    #[error("transport error: {0}")]
    Transport(String),

    // features
    #[error("lag {lag} of `{column}` is below its availability delay of {delay} h")]
    LagBelowAvailability { column: String, lag: usize, delay: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("too few rows: {0}")]
    TooFewRows(String),
    #[error("lookback {lookback} is too long for {rows} rows")]
    LookbackTooLong { lookback: usize, rows: usize },

    // learners
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("objective increased from {before} to {after} at sweep {sweep}")]
    Diverged { sweep: usize, before: f64, after: f64 },
    #[error("solver made no progress, worst KKT violation {worst_violation}")]
    NoProgress { worst_violation: f64 },
    #[error("impurity of an empty node is undefined")]
    EmptyNode,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    // evaluation / tuning
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("actual values have zero range; nRMSE undefined")]
    DegenerateRange,
    #[error("forests have different tree counts: {0:?}")]
    TreeCountMismatch(Vec<usize>),
    #[error("too few samples ({n}) for {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("candidate {candidate} failed: {source}")]
    LearnerFailure {
        candidate: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("usage: {0}")]
    Usage(String),

    // plumbing
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::BadDatetime { .. } => "BadDatetime",
            Error::EmptyFile(_) => "EmptyFile",
            Error::MissingFile(_) => "MissingFile",
            Error::DuplicateColumn(_) => "DuplicateColumn",
            Error::EmptySpan => "EmptySpan",
            Error::BadConfig(_) => "BadConfig",
            Error::NotHourly(_) => "NotHourly",
            Error::HttpStatus(_) => "HttpStatus",
            Error::Timeout => "Timeout",
            Error::NetworkDisabled => "NetworkDisabled",
            Error::Transport(_) => "Transport",
            Error::LagBelowAvailability { .. } => "LagBelowAvailability",
            Error::EmptyInput => "EmptyInput",
            Error::TooFewRows(_) => "TooFewRows",
            Error::LookbackTooLong { .. } => "LookbackTooLong",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Diverged { .. } => "Diverged",
            Error::NoProgress { .. } => "NoProgress",
            Error::EmptyNode => "EmptyNode",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::DegenerateRange => "DegenerateRange",
            Error::TreeCountMismatch(_) => "TreeCountMismatch",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::LearnerFailure { .. } => "LearnerFailure",
            Error::Usage(_) => "Usage",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Usage(_) | Error::BadConfig(_) => ErrorClass::Usage,
            Error::Diverged { .. }
            | Error::NoProgress { .. }
            | Error::NonFiniteLoss { .. }
            | Error::DegenerateRange => ErrorClass::Numeric,
            Error::LearnerFailure { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
