//! Error type shared by every module in this crate.

use thiserror::Error;

/// Failure modes surfaced by the library.
///
/// Numerical guards (rank, eigengap) carry a message describing the
/// offending quantity so callers can log actionable diagnostics.
#[derive(Debug, Error)]
pub enum SubspaceError {
    /// Input columns are numerically dependent; no orthonormal basis of the
    /// requested dimension exists.
    #[error("rank deficiency: {0}")]
    RankDeficiency(String),

    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The eigengap separating the principal subspace from its complement is
    /// numerically zero, so the subspace is not identifiable.
    #[error("degenerate eigengap: {0}")]
    DegenerateGap(String),

    /// Not enough observations for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Exhaustive support enumeration would exceed the configured budget.
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    /// A fit was requested on a grid without enough usable variation.
    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    /// A packing set failed re-verification of its declared properties.
    /// Constructions certify their output, so this indicates a bug.
    #[error("certification failed: {0}")]
    CertificationFailed(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// A text input (matrix file, config) could not be parsed.
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SubspaceError>;
