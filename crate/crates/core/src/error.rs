use alloc::string::String;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported rank {0}: only 1D and 2D signals are handled")]
    UnsupportedRank(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular deconvolution: a denominator bin vanished with lambda = 0")]
    Singular,
    #[error("oracle too large: {size} padded elements exceed the cap of {cap}")]
    OracleTooLarge { size: usize, cap: usize },
    #[error("undefined quotient: filter has zero energy")]
    UndefinedQuotient,
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
