use thiserror::Error;

/// Errors raised by the geometry, graph and spectral routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {index} is not a unit vector (|x| = {norm})")]
    NotUnitVector { index: usize, norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("torus basis is singular (det = {0})")]
    SingularBasis(f64),
    #[error("sphere dimension must be at least 2, got {0}")]
    BadSphereDim(usize),
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("coincident points {i} and {j} under a kernel singular at zero")]
    ZeroDistance { i: usize, j: usize },
    #[error("invalid weight function parameter: {0}")]
    BadKernel(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("graph is disconnected (lambda_2 = {lambda2:e}, lambda_n = {lambda_max:e})")]
    DisconnectedGraph { lambda2: f64, lambda_max: f64 },
    #[error("invalid interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("invariant {0} is not defined for this operator")]
    WrongOperator(&'static str),
    #[error("lattice parameters ({a}, {b}) invalid: {reason}")]
    BadLatticeParams { a: f64, b: f64, reason: &'static str },
    #[error("lattice sum cutoff {radius} leaves a tail bound of {tail:e}")]
    CutoffTooSmall { radius: f64, tail: f64 },
    #[error("torus graph size N must be even and at least 4, got {0}")]
    BadTorusSize(usize),
    #[error("invalid setting: {0}")]
    BadSetting(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSymmetric(_) | Error::DisconnectedGraph { .. } | Error::ZeroDistance { .. } | Error::CutoffTooSmall { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
