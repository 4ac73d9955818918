use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("non-physical configuration: {0}")]
    NonPhysical(String),

    #[error("twin diverged at t = {time:.3} s: {reason}")]
    Diverged { time: f64, reason: String },

    #[error("correction rejected: {0}")]
    InvalidCorrection(String),

    #[error("noise settings: {0}")]
    Noise(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("all {0} seed evaluations diverged; widen or shift the gain bounds")]
    AllSeedsDiverged(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
