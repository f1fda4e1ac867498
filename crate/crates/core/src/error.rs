use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("subsystem dimension must be positive (label `{0}`)")]
    ZeroDimension(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (minimum eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("Kraus family is not complete (deviation {0:e})")]
    Incomplete(f64),
    #[error("matrix is not an isometry (deviation {0:e})")]
    NotIsometry(f64),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("partitions overlap or do not cover the space")]
    BadPartition,
    #[error("support violation: logarithm of a rank-deficient operator is unbounded")]
    SupportViolation,
    #[error("problem too large: total dimension {0} exceeds the dense limit")]
    TooLarge(usize),
    #[error("invalid stochastic data: {0}")]
    InvalidStochastic(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
