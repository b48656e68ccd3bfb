use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnotVector(String),
    #[error("parameter {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh is not analysis-suitable: {0}")]
    NotAnalysisSuitable(String),
    #[error("differential image not found in target space: {0}")]
    TargetNotFound(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Numerical failures are distinguished from bad input by callers that
    /// map errors to exit codes.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
