use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite drift for particle {particle}")]
    NonFiniteDrift { particle: usize },

    #[error("blow-up at step {step}: particle {particle} reached magnitude {magnitude:e}")]
    BlowUp {
        step: usize,
        particle: usize,
        magnitude: f64,
    },

    #[error("restricted initialization rejected {attempts} ensembles at K = {level}; increase K")]
    RejectionBudgetExceeded { attempts: usize, level: f64 },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("size {size} exceeds the cap of {cap}; subsample first")]
    SizeCap { size: usize, cap: usize },

    #[error("empty time window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("fit refused: {0}")]
    FitRefused(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}
