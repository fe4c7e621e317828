use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the solver library and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("numerical blow-up at t = {time:.6e}, step {step}: {what}")]
    Blowup { time: f64, step: u64, what: String },

    #[error("time step underflow at t = {time:.6e}: dt = {dt:.3e}")]
    Stagnation { time: f64, dt: f64 },

    #[error("internal numerical error: {0}")]
    Numerics(String),

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error("diagnostic unavailable: {0}")]
    UnsupportedDiagnostic(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
