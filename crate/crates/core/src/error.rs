use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidPmf(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("conditioning on a zero-probability event: {0}")]
    ZeroProbabilityCondition(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid distortion table: {0}")]
    InvalidDistortion(String),

    #[error("no admissible reproduction: {0}")]
    NoAdmissibleReproduction(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("infeasible distortion {target} (smallest achievable distortion is {delta_min})")]
    InfeasibleDistortion { target: f64, delta_min: f64 },

    #[error("enumeration of {count} point-mass samplers exceeds the cap of {cap}; raise --cap to proceed")]
    CapExceeded { count: u128, cap: u64 },

    #[error("oracle search space of {size} kernels exceeds the limit of {limit}")]
    OracleSpaceTooLarge { size: u128, limit: u128 },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, Error>;
