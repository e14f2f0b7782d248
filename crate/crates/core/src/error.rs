use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point set is empty")]
    EmptyPointSet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cardinality mismatch: {left} vs {right} points")]
    CardinalityMismatch { left: usize, right: usize },

    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Fewer retained soft targets than an affine map needs.
    #[error("infeasible fit: {available} samples, at least {required} required for order {order}")]
    Infeasible {
        available: usize,
        required: usize,
        order: usize,
    },

    #[error("rank-deficient design: rank {rank} of {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("no moving point carries posterior mass above the threshold")]
    EmptyActiveSet,

    #[error("point {index} lies outside both bump supports")]
    Uncovered { index: usize },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("condensed and pairwise objectives disagree: pairwise {pairwise:e}, condensed {condensed:e}")]
    CondensationMismatch { pairwise: f64, condensed: f64 },
}

impl Error {
    pub(crate) fn at(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
