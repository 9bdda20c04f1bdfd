//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension {0} outside the supported range 3..=7")]
    InvalidDimension(usize),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {point:?} lies outside the domain ({reason})")]
    OutsideDomain { point: Vec<f64>, reason: String },

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("conformal factor is not positive at {point:?} (u = {value})")]
    NonPositiveFactor { point: Vec<f64>, value: f64 },

    #[error("nonpositive mass parameter {0}")]
    NonPositiveMass(f64),

    #[error("missing derivatives: {0}")]
    MissingDerivatives(String),

    #[error("degenerate gradient of the level function at {point:?}")]
    DegenerateGradient { point: Vec<f64> },

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("no horizon found: {0}")]
    NoHorizon(String),

    #[error("collar construction failed: {0}")]
    Collar(String),

    #[error("invalid mollifier: {0}")]
    InvalidMollifier(String),

    #[error("invalid perturbation model: {0}")]
    InvalidPerturbation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
