use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dim-mismatch: expected dimension {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("non-hermitian-input: {0}")]
    NonHermitian(String),

    #[error("non-unitary input: ||U^dag U - I||_F = {deviation:e}")]
    NonUnitary { deviation: f64 },

    #[error("singular-frame: frame operator is not invertible and mu = 0")]
    SingularFrame,

    #[error("zero frame operator")]
    ZeroFrame,

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trace {trace} is outside the accepted range for physical projection")]
    TraceOutOfRange { trace: f64 },

    #[error("fixed ensemble exhausted: requested index {index}, list holds {len}")]
    EnsembleExhausted { index: usize, len: usize },

    #[error("unsupported ensemble: {0}")]
    UnsupportedEnsemble(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },

    #[error("resource guard: {0}")]
    ResourceGuard(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}
