//! Error type shared by every module in the crate.
//!
//! Each variant corresponds to a rejection named in an operation contract;
//! callers that need exit-code mapping can rely on the variant, not the text.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Geometry that violates a structural precondition (area, nesting,
    /// mesh membership, rank bullets).
    #[error("invalid tile geometry: {0}")]
    Geometry(String),

    /// A scale parameter whose frequency support does not fit on the grid.
    #[error("scale overflow: {0}")]
    ScaleOverflow(String),

    /// Declared or inferred frequency bands that collide with Nyquist.
    #[error("band overflow: {0}")]
    BandOverflow(String),

    /// Grid mismatch between operands (sizes or periods differ).
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Exponent tuples outside the admissible simplex or a required range.
    #[error("exponent out of range: {0}")]
    ExponentRange(String),

    /// Degenerate input where a contract requires nondegeneracy
    /// (zero norm, empty candidate list, slope 0, empty collection).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed serialized data (tile files, containers, configs).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn geometry(msg: impl Into<String>) -> Self {
        CoreError::Geometry(msg.into())
    }
    pub fn scale_overflow(msg: impl Into<String>) -> Self {
        CoreError::ScaleOverflow(msg.into())
    }
    pub fn band_overflow(msg: impl Into<String>) -> Self {
        CoreError::BandOverflow(msg.into())
    }
    pub fn grid_mismatch(msg: impl Into<String>) -> Self {
        CoreError::GridMismatch(msg.into())
    }
    pub fn exponent(msg: impl Into<String>) -> Self {
        CoreError::ExponentRange(msg.into())
    }
    pub fn degenerate(msg: impl Into<String>) -> Self {
        CoreError::Degenerate(msg.into())
    }
    pub fn parse(msg: impl Into<String>) -> Self {
        CoreError::Parse(msg.into())
    }
}
