use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unsupported sampling rate {0} Hz (expected 10 or 100)")]
    UnsupportedRate(f64),

    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("non-finite input at index {0}")]
    NonFiniteInput(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sampling rate mismatch: expected {expected} Hz, got {actual} Hz")]
    RateMismatch { expected: f64, actual: f64 },

    #[error("trace {trace_id}: {source}")]
    Trace {
        trace_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("too few rows: {got}, need at least {need}")]
    TooFewRows { got: usize, need: usize },

    #[error("too few rows for class {class}: {got}, need at least {need}")]
    TooFewRowsPerClass { class: usize, got: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("matrix is already standardized")]
    AlreadyScaled,

    #[error("model format version {found} not supported (this build reads {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("corrupt model file: {0}")]
    CorruptFile(String),

    #[error("training set has no {0} events")]
    MissingClass(String),

    #[error("length mismatch: {0} predictions vs {1} actuals")]
    LengthMismatch(usize, usize),

    #[error("label {0} is not in the class set")]
    UnknownLabel(usize),

    #[error("ROC needs at least one positive and one negative example")]
    DegenerateClasses,

    #[error("too few events for permutation importance: {got}, need at least {need}")]
    TooFewEvents { got: usize, need: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{} changed since it was written by `{command}`", path.display())]
    ArtifactChanged { path: PathBuf, command: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable kind, used for the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::UnsupportedRate(_) => "UnsupportedRate",
            Error::SignalTooShort { .. } => "SignalTooShort",
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::RateMismatch { .. } => "RateMismatch",
            Error::Trace { source, .. } => source.kind(),
            Error::InfeasibleSplit(_) => "InfeasibleSplit",
            Error::TooFewRows { .. } => "TooFewRows",
            Error::TooFewRowsPerClass { .. } => "TooFewRowsPerClass",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::AlreadyScaled => "AlreadyScaled",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::CorruptFile(_) => "CorruptFile",
            Error::MissingClass(_) => "MissingClass",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::UnknownLabel(_) => "UnknownLabel",
            Error::DegenerateClasses => "DegenerateClasses",
            Error::TooFewEvents { .. } => "TooFewEvents",
            Error::Config(_) => "ConfigError",
            Error::MissingArtifact(_) => "MissingArtifact",
            Error::ArtifactChanged { .. } => "ArtifactChanged",
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_trace(self, trace_id: &str) -> Self {
        match self {
            e @ Error::Trace { .. } => e,
            e => Error::Trace {
                trace_id: trace_id.to_string(),
                source: Box::new(e),
            },
        }
    }
}
