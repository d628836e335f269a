// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input path does not exist: {0}")]
    MissingPath(PathBuf),

    #[error("malformed array file: {0}")]
    Format(String),

    #[error("unsupported array layout: {0}")]
    UnsupportedDtype(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range for {what} of length {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("cluster {cluster} produced an all-zero concept")]
    DegenerateConcept { cluster: usize },

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("covariance is singular even after ridge: {0}")]
    SingularCovariance(String),

    #[error("cannot average an empty cluster")]
    EmptyCluster,

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 usage/config, 3 data/format, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingPath(_) | Error::Config(_) | Error::Index { .. } => 2,
            Error::Io { .. }
            | Error::Format(_)
            | Error::UnsupportedDtype(_)
            | Error::Data(_)
            | Error::Schema(_)
            | Error::Shape(_)
            | Error::Json(_)
            | Error::TooFewSamples { .. } => 3,
            Error::DegenerateConcept { .. }
            | Error::DegenerateDirection(_)
            | Error::DegenerateLabels(_)
            | Error::DegenerateMatrix(_)
            | Error::TrainingDiverged { .. }
            | Error::SingularCovariance(_)
            | Error::EmptyCluster => 4,
        }
    }

    /// Short machine-readable tag used in structured CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::MissingPath(_) => "MissingPath",
            Error::Format(_) => "FormatError",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::Data(_) => "DataError",
            Error::Schema(_) => "SchemaError",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::Shape(_) => "ShapeError",
            Error::Config(_) => "ConfigError",
            Error::Index { .. } => "IndexError",
            Error::DegenerateConcept { .. } => "DegenerateConcept",
            Error::DegenerateDirection(_) => "DegenerateDirection",
            Error::DegenerateLabels(_) => "DegenerateLabels",
            Error::DegenerateMatrix(_) => "DegenerateMatrix",
            Error::TrainingDiverged { .. } => "TrainingDiverged",
            Error::SingularCovariance(_) => "SingularCovariance",
            Error::EmptyCluster => "EmptyCluster",
            Error::Json(_) => "JsonError",
        }
    }
}
