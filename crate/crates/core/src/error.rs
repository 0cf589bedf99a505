use thiserror::Error;

pub type Result<T> = std::result::Result<T, BreatherError>;

#[derive(Debug, Error)]
pub enum BreatherError {
    #[error("nonlinearity exponent p={p} outside [1/2, 2/{dim}) for dim={dim}")]
    InvalidExponent { p: f64, dim: usize },

    #[error("unsupported lattice dimension {0} (expected 1 or 2)")]
    InvalidDimension(usize),

    #[error("mesh must be positive and finite, got {0}")]
    InvalidMesh(f64),

    #[error("radius must be at least 2, got {0}")]
    InvalidRadius(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid mode: {0}")]
    InvalidMode(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shooting interval [{lo}, {hi}] does not bracket the ground state ({detail})")]
    NonBracketing { lo: f64, hi: f64, detail: String },

    #[error("shooting bisection did not converge after {iterations} steps; last bracket [{lo}, {hi}]")]
    BisectionFailed { lo: f64, hi: f64, iterations: usize },

    #[error("profile has zero mass")]
    ZeroMass,

    #[error("sampling produced an all-zero lattice field")]
    DegenerateSampling,

    #[error("Newton solve did not reach tolerance in {iterations} iterations (last residual {last:e})")]
    MaxIterations { iterations: usize, last: f64, trace: Vec<f64> },

    #[error("bordered Jacobian is singular at iteration {iteration}; restrict to the mode symmetry or decrease the mesh")]
    SingularJacobian { iteration: usize },

    #[error("Newton iterate left the basin of attraction at iteration {iteration} (residual {residual:e}, mesh {mesh})")]
    BasinFailure { iteration: usize, residual: f64, mesh: f64, trace: Vec<f64> },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
