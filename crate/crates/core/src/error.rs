use thiserror::Error;

/// Crate-wide error type. Recoverable conditions (bad input, parse
/// failures, size limits) are reported here; internal invariant
/// violations panic instead.
#[derive(Debug, Error)]
pub enum Error {
    /// Instance text could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An instance failed structural validation.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An exact computation was requested on an instance beyond its size cap.
    #[error("instance with {n} vertices exceeds the limit of {limit} for {operation}")]
    TooLarge {
        operation: &'static str,
        n: usize,
        limit: usize,
    },

    /// A per-arrival selection mass exceeded 1 where the lossless scheme
    /// guarantees a sub-distribution; indicates an implementation bug.
    #[error("selection mass {sum} exceeds 1 at arrival {arrival}")]
    MassExceeded { arrival: usize, sum: f64 },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
