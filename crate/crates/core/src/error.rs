use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter was outside its documented domain (negative squeezing,
    /// non-finite amplitude, malformed literal, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An intermediate quantity left the representable `f64` range.
    #[error("range error: {0}")]
    Range(String),

    /// The photon-number cutoff is too small to hold the state to the
    /// requested tolerance, or no admissible cutoff exists below the cap.
    #[error("truncation error: {0}")]
    Truncation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
