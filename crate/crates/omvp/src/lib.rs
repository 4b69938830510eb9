//! Files, runs and the command line around `omvp-core`.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod render;
pub mod run;

/// Failures of the harness commands.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] omvp_core::Error),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
