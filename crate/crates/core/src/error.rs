use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("control {u} outside the admissible disc |u| <= {u_max}")]
    ControlOutOfDomain { u: num_complex::Complex64, u_max: f64 },

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("positivity violated at step {step}: min eigenvalue {min_eig:e} (tolerance {tol:e}); reduce dt")]
    Positivity { step: usize, min_eig: f64, tol: f64 },

    #[error("explicit scheme unstable: dp time step {dt} exceeds admissible {max_dt}")]
    Unstable { dt: f64, max_dt: f64 },

    #[error("non-finite value in value slice at time {time} (node {node})")]
    SolverNaN { time: f64, node: usize },

    #[error("invalid grid configuration: {0}")]
    InvalidGrid(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("exponent overflow: {0}")]
    Overflow(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
