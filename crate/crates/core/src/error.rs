use alloc::boxed::Box;
use alloc::string::String;

use crate::train::TrainHistory;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in the forward recurrence at timestep {timestep}")]
    Overflow { timestep: usize },

    #[error("non-finite gradient for parameter {index}")]
    NonFiniteGradient { index: usize },

    #[error("path enumeration would produce {count} paths (limit {limit})")]
    TooManyPaths { count: u128, limit: u128 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("document is empty")]
    EmptyDocument,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("penalty is zero at initialization; cannot balance the regularization strength")]
    ZeroPenalty,

    #[error("training diverged at epoch {epoch}: {source}")]
    Diverged {
        epoch: usize,
        history: Box<TrainHistory>,
        #[source]
        source: Box<Error>,
    },
}
