use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid exponent profile: {0}")]
    InvalidProfile(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("exponent profile lies on the boundary 1/p_k + ... + 1/p_m = 1/r")]
    Boundary,

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("enumeration needs {bits} sign bits, cap is {cap}")]
    EnumerationCap { bits: usize, cap: usize },

    #[error("unsupported exponent pattern for exact enumeration: {0}")]
    UnsupportedPattern(String),

    #[error("exponents are not admissible for this profile (margins {0:?})")]
    Inadmissible(Vec<f64>),

    #[error("invalid size list: {0}")]
    InvalidSizes(String),

    #[error("rademacher level {0} outside 1..=20")]
    RademacherLevel(usize),

    #[error("parse error: {0}")]
    Parse(String),
}
