use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("eigenvalue iteration did not converge: {0}")]
    EigenFailure(String),
    #[error("loss of orthogonality: Gram deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    Orthogonality { deviation: f64, tolerance: f64 },
    #[error("structure violation: {0}")]
    Structure(String),
    #[error("non-positive pivot {pivot:.6e} at row {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("pivot of magnitude {magnitude:.3e} below threshold {threshold:.3e} at row {index}")]
    TinyPivot { index: usize, magnitude: f64, threshold: f64 },
    #[error("numerically singular matrix at column {0}")]
    Singular(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("spectral intervals overlap: [{0:.3e}, {1:.3e}] and [{2:.3e}, {3:.3e}]")]
    OverlappingSpectra(f64, f64, f64, f64),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// True for failures that come from the numerics rather than from the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenFailure(_)
                | Error::Orthogonality { .. }
                | Error::Structure(_)
                | Error::NotPositiveDefinite { .. }
                | Error::TinyPivot { .. }
                | Error::Singular(_)
                | Error::NoConvergence(_)
                | Error::OverlappingSpectra(..)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
