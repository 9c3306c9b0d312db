use std::fmt;
use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Pipeline stages, named in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Spectrum,
    Convergence,
    Bloch,
    Adiabatic,
    Husimi,
    Absorption,
    Ratio,
    Manifest,
    Sweep,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Spectrum => "spectrum",
            Stage::Convergence => "convergence",
            Stage::Bloch => "bloch",
            Stage::Adiabatic => "adiabatic",
            Stage::Husimi => "husimi",
            Stage::Absorption => "absorption",
            Stage::Ratio => "ratio",
            Stage::Manifest => "manifest",
            Stage::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: sbdimer_core::Error,
    },

    #[error("cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
}

impl CliError {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            CliError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

/// Attaches a stage name to core errors.
pub(crate) trait InStage<T> {
    fn in_stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<sbdimer_core::Error>> InStage<T> for std::result::Result<T, E> {
    fn in_stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| CliError::Stage {
            stage,
            source: e.into(),
        })
    }
}
