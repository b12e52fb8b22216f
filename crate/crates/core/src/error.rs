use crate::forecast::sarima::SarimaParams;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("transform is not invertible: {0}")]
    NotInvertible(String),

    #[error("transform chain has not been fitted")]
    NotFitted,

    #[error("insufficient history: need at least {needed} points, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("invalid model specification: {0}")]
    Spec(String),

    /// The optimizer ran out of iterations. `best` holds the best parameters found.
    #[error("optimizer did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        best: Box<SarimaParams>,
    },

    #[error("model has not been trained")]
    NotTrained,

    #[error("metric error: {0}")]
    Metric(String),

    #[error("ensemble error: {0}")]
    Ensemble(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
