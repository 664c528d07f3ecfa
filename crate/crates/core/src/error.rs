use std::path::PathBuf;

/// Errors raised by signal handling, detection, and Monte-Carlo routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("signal has no samples")]
    EmptySignal,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("time column decreases on line {line}")]
    NonMonotoneTime { line: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("pulse [{onset}, {onset}+{duration}) does not fit in {len} samples")]
    OutOfRange {
        onset: usize,
        duration: usize,
        len: usize,
    },

    #[error("component of length {component_len} shifted by {shift} exceeds scenario length {len}")]
    LengthMismatch {
        component_len: usize,
        shift: usize,
        len: usize,
    },

    #[error("unknown signal source `{0}`")]
    UnknownSource(String),

    #[error("phase {phase} is not below decimation factor {factor}")]
    PhaseOutOfRange { phase: usize, factor: usize },

    #[error("signal of length {len} is shorter than decimation factor {factor}")]
    TooShort { len: usize, factor: usize },

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("scenario set is empty")]
    EmptyScenarioSet,

    #[error("hypotheses have identical means")]
    DegenerateHypotheses,

    #[error("prior weight of a compared hypothesis is zero")]
    ZeroPrior,

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("hyperplane normal vector is zero")]
    ZeroNormal,

    #[error("scenario {index} has the same mean as scenario {other}")]
    DuplicateMean { index: usize, other: usize },

    #[error("collection is empty")]
    EmptyCollection,

    #[error("invalid Monte-Carlo configuration: {0}")]
    InvalidMcConfig(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical model itself rather than of the
    /// supplied configuration or data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite | Error::DegenerateHypotheses | Error::ZeroNormal
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
