use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("electrode {electrode} captures no boundary edge; the mesh is too coarse")]
    ElectrodeUnresolved { electrode: usize },

    #[error("electrode {electrode} is not tagged on the mesh")]
    MissingElectrode { electrode: usize },

    #[error("conductivity {value} at node {node} lies outside [{lower}, {upper}]")]
    InadmissibleConductivity {
        node: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("point ({x}, {y}) is not interior to a boundary face; the outward normal is ambiguous")]
    AmbiguousNormal { x: f64, y: f64 },

    #[error("operation requires a disk domain")]
    UnsupportedDomain,

    #[error("linear solver failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolverFailure { residual: f64, iterations: usize },

    #[error("total variation with eps = 0 is not differentiable")]
    NonsmoothPenalty,

    #[error("objective became non-finite at iteration {}", history.len())]
    Diverged { history: Vec<f64> },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
