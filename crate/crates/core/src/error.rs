use thiserror::Error;

/// Errors raised by model construction, propagation and gate analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown dot {0}")]
    UnknownDot(usize),

    #[error("channel separation negative: delta1 ({delta1}) must exceed delta2 ({delta2})")]
    ChannelSeparationNegative { delta1: f64, delta2: f64 },

    #[error("lab-frame frequencies missing")]
    MissingLabFrequencies,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("resonant case delta = 0 is outside the dispersive model")]
    ResonantDetuning,

    #[error("driven dots must share one cavity detuning")]
    MismatchedDetuning,

    #[error("schedule infeasible: {0}")]
    Infeasible(String),

    #[error("convergence failure: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
