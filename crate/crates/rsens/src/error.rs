use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("variant mismatch: {left} vs {right}")]
    VariantMismatch { left: &'static str, right: &'static str },

    #[error("divergence undefined: {0}")]
    UndefinedDivergence(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("dimension {index} out of range (size {size})")]
    DimensionOutOfRange { index: usize, size: usize },

    #[error("missing cross-derivative for pair ({0}, {1})")]
    MissingCrossDerivative(usize, usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
