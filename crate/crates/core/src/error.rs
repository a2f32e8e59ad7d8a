use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid scenario: {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("density positivity breached at particle {particle} (rho = {rho})")]
    DensityBreach { particle: usize, rho: f64 },

    #[error("time step too large for infectivity: beta*dt = {product} > 1 at particle {particle}")]
    TimeStep { particle: usize, product: f64 },

    #[error("step {step} aborted in phase '{phase}': {source}")]
    Phase {
        step: u64,
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
