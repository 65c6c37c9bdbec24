use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit reports, grouped by category.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("integrity error for vehicle {vehicle_id}: {message}")]
    Integrity { vehicle_id: i64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("script error: {0}")]
    Script(String),

    #[error("augmentation error: {0}")]
    Augmentation(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("state error: {0}")]
    State(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: {message}")]
    Training {
        epoch: usize,
        batch: usize,
        message: String,
    },

    #[error("check failed: {0}")]
    Check(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("missing artifact {}", path.display())]
    MissingArtifact { path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short category name used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Integrity { .. } => "integrity",
            Error::Config(_) => "config",
            Error::Script(_) => "script",
            Error::Augmentation(_) => "augmentation",
            Error::Input(_) => "input",
            Error::State(_) => "state",
            Error::Shape { .. } => "contract",
            Error::Training { .. } => "training",
            Error::Check(_) => "check",
            Error::Format(_) => "format",
            Error::MissingArtifact { .. } => "stage",
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => "io",
        }
    }
}
