use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the optimizer and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),

    #[error("diagonal scaling entry {index} must be positive and finite, got {value}")]
    InvalidDiagonal { index: usize, value: f64 },

    #[error("rank-one direction v has zero norm")]
    DegenerateDirection,

    #[error("population size must be an even number >= 2, got {0}")]
    InvalidPopulationSize(usize),

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("distance weight exponent must be positive, got {0}")]
    InvalidAlpha(f64),

    #[error("population must be sorted by objective value")]
    UnsortedPopulation,

    #[error("expected {expected} objective values, got {got}")]
    FitnessCountMismatch { expected: usize, got: usize },

    #[error("objective value at index {index} is not finite ({value})")]
    NonFiniteFitness { index: usize, value: f64 },

    #[error("ask() called while a generation is awaiting tell()")]
    AskPending,

    #[error("tell() called without a preceding ask()")]
    TellWithoutAsk,

    #[error("evaluation budget {max_evals} is smaller than the population size {lambda}")]
    BudgetTooSmall { max_evals: usize, lambda: usize },

    #[error("root finding did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
