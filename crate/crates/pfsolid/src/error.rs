use std::path::PathBuf;

use thiserror::Error;

/// Simulation-wide error type. Variants map to the exit categories reported
/// by the command line front end (config | numerical | io).
#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical fault at step {step}, cell ({x},{y},{z}): {detail}")]
    Numerical {
        step: u64,
        x: i64,
        y: i64,
        z: i64,
        detail: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("mesh stitching error: {0}")]
    Stitch(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Category label used for CLI exit messages.
    pub fn category(&self) -> &'static str {
        match self {
            SimError::Config(_) => "config",
            SimError::Numerical { .. } => "numerical",
            SimError::Io { .. } => "io",
            SimError::Format(_) => "io",
            SimError::Stitch(_) => "io",
            SimError::Sequencing(_) => "numerical",
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
