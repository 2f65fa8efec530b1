use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension { what: &'static str, expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e} exceeds {tolerance:.0e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("agent index {index} out of range for {agents} agents")]
    AgentOutOfRange { index: usize, agents: usize },

    #[error("invalid box constraint at coordinate {coord}: lower {lower} must be < upper {upper}")]
    InvalidBox { coord: usize, lower: f64, upper: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A planner inequality that must hold for the requested parameters does not.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}
