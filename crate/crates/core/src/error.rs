use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("periodic mismatch: left boundary vertex {vertex} at y = {y} has no partner on the right boundary")]
    PeriodicMismatch { vertex: usize, y: f64 },

    #[error("unsupported polynomial degree {0} (supported: 1, 2)")]
    UnsupportedDegree(usize),

    #[error("no quadrature rule with exactness {0} (maximum 10)")]
    QuadratureUnavailable(usize),

    #[error("coarse grid alignment: {0}")]
    Alignment(String),

    #[error("unknown boundary marker {0}")]
    UnknownMarker(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spaces are defined on different meshes")]
    IncompatibleMeshes,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("singular matrix (pivot {0})")]
    Singular(usize),

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("iterative solver did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("nudging parameter is infinite; use direct enforcement instead")]
    InfiniteNudging,

    #[error("measurement node ({0}, {1}) has no matching fine-mesh degree of freedom")]
    UnmatchedNode(f64, f64),

    #[error("battery function has zero gradient")]
    ZeroGradient,

    #[error("no exponential decay detected (log-slope {0:.3e})")]
    NoDecay(f64),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("truth trajectory exhausted at step {0}")]
    TrajectoryExhausted(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line front end: 2 for validation
    /// failures, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular(_)
            | Error::NotSpd
            | Error::NotConverged { .. }
            | Error::NonFinite(_)
            | Error::NoDecay(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
