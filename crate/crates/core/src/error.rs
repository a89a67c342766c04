use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected size {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("projection did not converge: {0}")]
    ProjectionFailure(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { solver: &'static str, iterations: usize, residual: f64, history: Vec<f64> },

    #[error("load is outside the range of the equilibrium operator (residual {0:.3e})")]
    InfeasibleLoad(f64),

    #[error("step {step} failed: {source}")]
    StepFailure {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
