use alloc::string::String;

/// Errors raised by the simulator and the learners.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid position ({row}, {col}): {reason}")]
    InvalidPosition { row: usize, col: usize, reason: &'static str },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("contract violated: {0}")]
    Contract(String),
}

pub type Result<T> = core::result::Result<T, Error>;
