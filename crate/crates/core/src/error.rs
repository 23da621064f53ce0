use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("sequence of length {len} exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("text span is empty")]
    EmptyTextSpan,

    #[error("budget {0} outside (0, 1]")]
    InvalidBudget(f64),

    #[error("invalid window {window} for sequence of length {len}")]
    InvalidWindow { window: usize, len: usize },

    #[error("unknown task kind `{0}`")]
    UnknownTaskKind(String),

    #[error("invalid task parameters: {0}")]
    InvalidTask(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing baseline for model `{model}`, benchmark `{benchmark}`")]
    MissingBaseline { model: String, benchmark: String },

    #[error("baseline score for model `{model}`, benchmark `{benchmark}` is not positive")]
    ZeroBaseline { model: String, benchmark: String },

    #[error("method `{method}` on model `{model}` has no result for benchmark `{benchmark}`")]
    MissingCell {
        method: String,
        model: String,
        benchmark: String,
    },

    #[error("need at least 2 benchmarks, got {0}")]
    TooFewBenchmarks(usize),

    #[error("mean ratio is zero; metric undefined")]
    ZeroMean,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("non-positive timing in record {0}")]
    NonPositiveTiming(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
