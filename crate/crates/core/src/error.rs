use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the model is defined.
    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("index {index} out of range for {what} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("no classically allowed region for energy {energy} on the {branch} branch (minimum {minimum})")]
    EmptyOrbit {
        branch: &'static str,
        energy: f64,
        minimum: f64,
    },

    #[error("spectra derived from different eigensystems (fingerprints {left:016x} and {right:016x})")]
    ProvenanceMismatch { left: u64, right: u64 },

    #[error("malformed data at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }
}
