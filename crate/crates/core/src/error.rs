use thiserror::Error;

/// Errors raised by the samplers, fits and problem definitions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate weights: no finite log-weight")]
    DegenerateWeights,

    #[error("weight degeneracy: effective sample size {ess:.3} below 2")]
    WeightDegeneracy { ess: f64 },

    #[error("underdetermined fit: {n} samples for a {k}-dimensional Gaussian (need at least {})", k + 2)]
    UnderdeterminedFit { n: usize, k: usize },

    #[error("matrix is not positive definite after jitter ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("adapt_H failed to stabilize after {iterations} inner iterations")]
    AdaptHUnstable { iterations: usize },

    #[error("rank exceeded budget: rank {rank} needs {needed} samples per level, cap is {cap}")]
    RankExceededBudget {
        rank: usize,
        needed: usize,
        cap: usize,
    },

    #[error("tempering did not reach beta = 1 within {max_steps} steps (last beta = {beta})")]
    MaxStepsExceeded { max_steps: usize, beta: f64 },

    #[error("zero reference norm in relative error")]
    ZeroReference,

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
