use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("network is disconnected: reduced susceptance matrix is singular")]
    DisconnectedNetwork,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular regressor matrix: {0}")]
    Singular(String),

    #[error("matrix is not positive semidefinite (after diagonal jitter)")]
    NotPositiveSemidefinite,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid uncertainty set: {0}")]
    InvalidSet(String),

    #[error("uncertainty set is empty")]
    EmptySet,

    #[error("label collision between polyhedra: {0}")]
    LabelCollision(String),

    #[error("point is not a member of the uncertainty set (violation {0:.3e})")]
    NotInSet(f64),

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("LP is infeasible: {0}")]
    Infeasible(String),

    #[error("second-stage recourse is infeasible; slack construction is broken")]
    RecourseInfeasible,

    #[error("vertex budget of {0} exceeded during enumeration")]
    VertexBudget(usize),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
