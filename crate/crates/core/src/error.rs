use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A tape operation produced NaN or infinity.
    #[error("non-finite value produced by op #{op_index} ({op})")]
    Numerical { op_index: usize, op: &'static str },

    /// An iterative routine produced a non-finite intermediate.
    #[error("non-finite intermediate at iteration {iteration} of {routine}")]
    NonFiniteIteration {
        routine: &'static str,
        iteration: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("variable is not a node of this tape")]
    UnknownLeaf,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
