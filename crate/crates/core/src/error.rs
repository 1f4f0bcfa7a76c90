use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("field mismatch: {0}")]
    SpecMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precision error: {0}")]
    Precision(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix {index} is not invertible (zero determinant)")]
    NonInvertible { index: usize },
    #[error("irreducible form requires (q+1) not dividing m: q = {q}, m = {m}, and q+1 divides m")]
    DivisibleExponent { q: u64, m: i64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("zeta fit failed: {0}")]
    Fit(String),
    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
