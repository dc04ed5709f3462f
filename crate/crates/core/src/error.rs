use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no vectors")]
    NoVectors,

    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty frequency table")]
    EmptyFrequencyTable,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("degenerate sentence norm")]
    DegenerateSentenceNorm,

    #[error("degenerate sentence vector")]
    DegenerateSentenceVector,

    #[error("zero-weight substructure")]
    ZeroWeightSubstructure,

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("marginal sums differ: {row_sum} vs {col_sum}")]
    MarginalMismatch { row_sum: f64, col_sum: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sinkhorn did not converge after {iterations} iterations (violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("degenerate score vector")]
    DegenerateScores,

    #[error("empty sentence: no in-vocabulary tokens")]
    EmptySentence,

    #[error("no records")]
    NoRecords,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
