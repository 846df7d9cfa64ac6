use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the library.
///
/// Variants are grouped so the CLI can map them onto stable exit codes
/// (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: non-numeric value `{value}` in numeric column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: unseen category `{value}` in column `{column}`")]
    UnseenCategory {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("degenerate boundaries: {0}")]
    DegenerateBoundaries(String),

    #[error("verification failed: {0}")]
    Verification(String),

    /// Failure inside a named pipeline stage; keeps the inner exit code.
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| match source {
            Error::Stage { .. } => source,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code for this error: 2 config, 3 data, 4 numeric,
    /// 5 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidSpec(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. } => 2,
            Error::Data(_)
            | Error::MissingColumn(_)
            | Error::NonNumericCell { .. }
            | Error::UnseenCategory { .. }
            | Error::EmptyDataset
            | Error::Io { .. }
            | Error::Json(_) => 3,
            Error::Numeric(_) | Error::DegenerateBoundaries(_) => 4,
            Error::Verification(_) => 5,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
