use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (residual {0:e})")]
    NotSymmetric(f64),

    #[error("contraction metric is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("first Bianchi identity violated (residual {0:e})")]
    BianchiViolation(f64),

    #[error("tensor fails curvature symmetries: {0}")]
    InvalidTensor(String),

    #[error("frame is not orthonormal (defect {0:e})")]
    NotOrthonormal(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside provider domain: {0}")]
    OutOfDomain(String),

    #[error("insufficient stencil room: {0}")]
    StencilRoom(String),

    #[error("provider cannot supply derivatives of order ({xdeg}, {tdeg})")]
    DerivativeOrder { xdeg: usize, tdeg: usize },

    #[error("Ricci curvature not positive definite at {point:?} (min eigenvalue {min_eigenvalue:e})")]
    RicciNotPositive { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("CFL condition violated: dt = {dt:e} > {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("warped profile lost positivity at t = {0}")]
    ProfileCollapse(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
