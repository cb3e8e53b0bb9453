//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point is behind the camera")]
    BehindCamera,

    #[error("no contact detected")]
    NoContact,

    #[error("calibration incomplete: no detection for vertex ({iu}, {iv})")]
    CalibrationIncomplete { iu: usize, iv: usize },

    #[error("lookup table missing for quad {0}")]
    TableMissing(usize),

    #[error("tracking degenerate: {0}")]
    TrackingDegenerate(String),

    #[error("bundle format error: {0}")]
    BundleFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_parameter(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
