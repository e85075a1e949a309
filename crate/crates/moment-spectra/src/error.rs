//! Error type shared across the crate.

/// Errors produced by construction, numerics, and oracle routines.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Operands have incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A dimension or size argument is malformed (e.g. a coordinate length
    /// that is not of the form d(d+1)/2).
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A matrix that must be positive semidefinite has an eigenvalue below
    /// the accepted tolerance.
    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    /// An iterative solver hit its iteration cap before meeting its
    /// convergence criterion.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// The request exceeds a configured dense-storage or oracle size cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A scalar parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Inputs that must come from one measure are mutually inconsistent
    /// (e.g. a centered operator with a significantly negative eigenvalue).
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    /// The measure is degenerate for the requested statistic (e.g. a point
    /// mass at the origin has no leading-eigenvalue ratio).
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    /// The requested family/size combination has no implementation.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Input data violates a basic validity requirement (non-finite values,
    /// weight totals, empty support).
    #[error("invalid data: {0}")]
    InvalidData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
