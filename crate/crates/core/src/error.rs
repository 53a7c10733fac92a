//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while validating inputs, running optimizers, or touching files.
#[derive(Debug, Error)]
pub enum CadreError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid target vehicle {index}: scenario has {vehicles} vehicles (ego is 0)")]
    InvalidTarget { index: usize, vehicles: usize },

    #[error("trajectory needs at least 2 states, got {0}")]
    TrajectoryTooShort(usize),

    #[error("perturbation has {got} steps but the action sequence needs {need}")]
    PerturbationLength { got: usize, need: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("archive measure spec mismatch: file has {found}, expected {expected}")]
    SpecMismatch { found: String, expected: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("synthetic scene construction failed after {0} attempts")]
    SceneConstruction(u32),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CadreError {
    /// True for failures of the filesystem rather than of the inputs themselves.
    pub fn is_io(&self) -> bool {
        matches!(self, CadreError::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CadreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CadreError> = std::result::Result<T, E>;
