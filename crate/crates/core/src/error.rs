use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("unknown field `{0}` (expected sine_flow, abc, lorenz or constant)")]
    UnknownField(String),

    #[error("field `{name}` takes {expected} parameters, got {got}")]
    FieldArity {
        name: String,
        expected: String,
        got: usize,
    },

    #[error("malformed sampled field: {0}")]
    MalformedField(String),

    #[error("sample shape mismatch: expected {expected} nodes, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("point {point:?} lies outside the closed domain on axis {axis}")]
    OutsideDomain { point: Vec<f64>, axis: usize },

    #[error("vector field returned a non-finite value at {0:?}")]
    NonFiniteField(Vec<f64>),

    #[error("trajectory integration produced a non-finite state; reduce the step size")]
    NonFiniteState,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("set has zero mass under the given density")]
    ZeroMass,

    #[error("shifted system is singular for every attempted shift (last shift {0})")]
    SingularShift(f64),

    #[error("eigensolver did not converge: {converged} of {requested} pairs after {iterations} restarts")]
    NotConverged {
        converged: usize,
        requested: usize,
        iterations: usize,
    },

    #[error("null space has dimension {dimension}; a nonnegative representative was returned")]
    MultipleNullSpace {
        dimension: usize,
        representative: Vec<f64>,
    },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
