//! Error type shared by all modules.

use nalgebra::Vector2;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A point was requested outside the closed unit disk (plus the small
    /// finite-difference collar the evaluators tolerate).
    #[error("point ({:.6}, {:.6}) lies outside the domain (|x| = {:.6})", .0.x, .0.y, .0.norm())]
    OutsideDomain(Vector2<f64>),

    /// A sampled metric tensor failed positive definiteness.
    #[error("metric sample at ({:.6}, {:.6}) is not positive definite: min eigenvalue {min_eigenvalue:.3e}", point.x, point.y)]
    NotPositiveDefinite {
        point: Vector2<f64>,
        min_eigenvalue: f64,
    },

    /// Smoothing at the requested scale destroyed positive definiteness.
    #[error("mollification scale alpha = {alpha} too small: min eigenvalue {min_eigenvalue:.3e}")]
    AlphaTooSmall { alpha: u32, min_eigenvalue: f64 },

    /// The caller violated an interface contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// An iterative numeric procedure failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
