use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset failed validation with {} violation(s); first: {}", .0.len(), .0[0])]
    InvalidDataset(Vec<Violation>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Gaussian block posterior has non-positive variance {0}")]
    DegenerateVariance(f64),

    #[error("non-finite value in restart with seed {seed} at iteration {iteration}: {what}")]
    NonFinite {
        seed: u64,
        iteration: usize,
        what: &'static str,
    },

    #[error("all {} restarts failed; first failure: {}", .0.len(), .0[0])]
    AllRestartsFailed(Vec<Error>),

    #[error("partitions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("a partition needs at least two objects, got {0}")]
    TooFewObjects(usize),

    #[error("empty partition list")]
    EmptyPartitionList,

    #[error("assignment universes differ: {0}")]
    UniverseMismatch(String),

    #[error("cannot mask {requested} cells without fully masking a feature ({available} maskable)")]
    MissingRatioUnsatisfiable { requested: usize, available: usize },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
