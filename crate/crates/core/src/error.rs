use thiserror::Error;

use crate::linalg::LinalgError;
use crate::stft::StftError;
use crate::wav::WavError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty segment")]
    EmptySegment,
    #[error("degenerate estimate: {0}")]
    Degenerate(String),
    #[error("gradient descent diverged: cost rose from {before:.6e} to {after:.6e}")]
    Diverged { before: f64, after: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
