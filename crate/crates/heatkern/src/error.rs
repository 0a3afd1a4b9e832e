use thiserror::Error;

/// Errors produced by kernel evaluation, quadrature, and configuration.
#[derive(Debug, Error)]
pub enum Error {
    /// A point is not valid on the manifold it is used with.
    #[error("invalid point: {0}")]
    InvalidPoint(String),

    /// An argument violates a precondition (nonpositive time, bad range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration cannot be executed (mode unavailable, dimension mismatch, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A series or integral cannot be summed safely (e.g. |eps| * C >= 1).
    #[error("divergence risk: {0}")]
    Divergence(String),

    /// The requested operation is not supported for this variant.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Scenario or report files failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
