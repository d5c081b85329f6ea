use thiserror::Error;

use crate::distributions::FamilyTag;

pub type Result<T, E = SpeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SpeError {
    #[error("invalid {family} parameters: {reason}")]
    InvalidParams { family: FamilyTag, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit failed for {family}: {reason}")]
    Fit { family: FamilyTag, reason: String },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("MAP estimation failed: {message} ({} starts tried)", diagnostics.len())]
    Estimation {
        message: String,
        diagnostics: Vec<String>,
    },

    #[error("proposal fit failed along dimension {dimension}: curvature {curvature} is not negative")]
    Proposal { dimension: usize, curvature: f64 },

    #[error("inference failed: {0}")]
    Inference(String),

    #[error("curve error: {0}")]
    Curve(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SpeError {
    /// Stable machine-readable class name, used by the CLI for error output
    /// and exit codes.
    pub fn class(&self) -> &'static str {
        match self {
            SpeError::InvalidParams { .. } | SpeError::Domain(_) => "domain",
            SpeError::Fit { .. } => "fit",
            SpeError::Optimization(_) | SpeError::Estimation { .. } => "estimation",
            SpeError::Proposal { .. } | SpeError::Inference(_) => "inference",
            SpeError::Curve(_) | SpeError::Metric(_) => "curve",
            SpeError::Parse { .. } => "parse",
            SpeError::Validation(_) => "validation",
            SpeError::Config(_) => "config",
            SpeError::Io(_) | SpeError::Csv(_) => "io",
            SpeError::Json(_) => "serialization",
        }
    }
}
