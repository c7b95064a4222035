use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. The CLI maps each group to its own
/// exit code via [`Error::class`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("instrument matrix is rank deficient; deficient columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("singular normal equations; collinear columns: {} (is a regressor constant or duplicated?)", columns.join(", "))]
    Collinear { columns: Vec<String> },

    #[error("spatial autoregressive coefficient {rho} is non-stationary (|rho| >= 1)")]
    NonStationary { rho: f64 },

    #[error("non-finite value at time index {t}")]
    NonFinite { t: usize },

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate}): loss is not finite")]
    Divergence { epoch: usize, learning_rate: f64 },

    #[error("generator instability: |y| exceeded {limit} at time index {t}")]
    Unstable { limit: f64, t: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: duplicate key ({region}, {date})")]
    DuplicateKey {
        path: PathBuf,
        line: u64,
        region: String,
        date: String,
    },

    #[error("{path}:{line}: region '{region}' is not listed in the regions file")]
    MissingRegion {
        path: PathBuf,
        line: u64,
        region: String,
    },

    #[error("{path}:{line}: date {date} for region '{region}' does not follow the previous row's date")]
    NonMonotoneDates {
        path: PathBuf,
        line: u64,
        region: String,
        date: String,
    },

    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: {message}")]
    Gap { path: PathBuf, message: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse grouping of errors, one per process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Input,
    Estimation,
    Training,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Input => 3,
            ErrorClass::Estimation => 4,
            ErrorClass::Training => 5,
            ErrorClass::Io => 6,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::InvalidInput(_)
            | Error::Degenerate(_)
            | Error::InsufficientData(_)
            | Error::DimensionMismatch { .. }
            | Error::Parse { .. }
            | Error::DuplicateKey { .. }
            | Error::MissingRegion { .. }
            | Error::NonMonotoneDates { .. }
            | Error::MissingColumn { .. }
            | Error::Gap { .. }
            | Error::Alignment(_) => ErrorClass::Input,
            Error::RankDeficient { .. }
            | Error::Collinear { .. }
            | Error::NonStationary { .. }
            | Error::Unstable { .. } => ErrorClass::Estimation,
            Error::NonFinite { .. } | Error::Divergence { .. } => ErrorClass::Training,
            Error::Io { .. } => ErrorClass::Io,
            Error::Stage { source, .. } => source.class(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the stage it came from (once).
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
