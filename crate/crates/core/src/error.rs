use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The moderate-deviation statements only address the right tail.
    #[error("right-tail only: k = {k} is below lambda = {lambda}")]
    RightTailOnly { k: i64, lambda: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} exceeds the exact-mode limit of {limit}")]
    SizeLimit {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("index {index} outside {lo}..={hi}")]
    OutOfRange { index: i64, lo: i64, hi: i64 },

    #[error("cannot parse `{input}` as a rational number")]
    ParseRational { input: String },

    #[error("test function is not non-decreasing and non-negative on 0..={k}")]
    NotMonotone { k: u64 },

    #[error("laws do not describe the same variable: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
