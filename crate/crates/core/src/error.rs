use thiserror::Error;

/// Errors raised by the library.
///
/// `Contract` covers violated preconditions (the CLI maps it to exit code 1);
/// numerical trouble that still yields a usable answer is reported through
/// flags on the result types instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("integrand returned {value} at {point:?}")]
    Integrand { value: f64, point: Vec<[f64; 2]> },
    #[error("overflow while evaluating {0}")]
    Overflow(String),
    #[error("lattice construction failed: {0}")]
    Lattice(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Contract(msg()))
    }
}
