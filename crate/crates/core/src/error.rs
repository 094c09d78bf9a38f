use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("inward normal ({0}, {1}) is not a unit vector")]
    NonUnitNormal(f64, f64),

    #[error("tridiagonal solve broke down at row {row} (pivot {pivot})")]
    SolverBreakdown { row: usize, pivot: f64 },

    #[error("non-finite value produced at time level {level}")]
    NonFinite { level: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("coefficient outside [{alpha}, {beta}] at nodes {nodes:?}")]
    OutOfBounds { alpha: f64, beta: f64, nodes: Vec<usize> },

    #[error("averaging window sigma = {sigma} is not a whole number of time steps in (0, T] (dt = {dt})")]
    MisalignedWindow { sigma: f64, dt: f64 },

    #[error("contraction guard: lambda * ||phi||_inf = {product} must be < 2")]
    ContractionGuard { product: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
