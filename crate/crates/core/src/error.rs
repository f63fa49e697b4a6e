use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("degenerate input in {0}: zero-norm vector")]
    Degenerate(&'static str),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: u32, size: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;
