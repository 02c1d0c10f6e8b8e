use thiserror::Error;

/// Errors raised by the geometry, kinetics, scheduling and meshing layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate configuration at simplex {simplex:?}: {reason}")]
    Degenerate { simplex: Vec<usize>, reason: String },

    #[error("point ({x:.6}, {y:.6}, {z:.6}) lies outside the clipped domain")]
    OutsideDomain { x: f64, y: f64, z: f64 },

    #[error("singular motion: |xi| = {norm:e} below {limit:e} (patch apex)")]
    Singular { norm: f64, limit: f64 },

    #[error("non-generic crossing: {0}")]
    NonGeneric(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("projection onto the skin did not converge after {iterations} iterations")]
    ProjectionFailed { iterations: usize },

    #[error("non-manifold mesh: {0}")]
    NonManifold(String),

    #[error("apex approached: length scale {rho:e} below {limit:e} at t = {time}")]
    ApexApproach { rho: f64, limit: f64, time: f64 },

    #[error("safety violation: {0}")]
    SafetyViolation(String),

    #[error("flip limit of {0} exceeded")]
    FlipLimit(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
