use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    /// A contour or parameter set violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Arguments to an operation violate its precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The closed form is not defined for these inputs.
    #[error("outside the domain of the closed form: {0}")]
    Domain(String),

    #[error("state space too large: {states} states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error("restricted state space is empty: {0}")]
    EmptyStateSpace(String),

    /// The test function is constant, so its Rayleigh quotient is undefined.
    #[error("degenerate test function: {0}")]
    Degenerate(String),

    #[error("transition matrix is not reversible (max detailed-balance residual {0:e})")]
    NonReversible(f64),

    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),

    #[error("step counter overflow")]
    Overflow,

    /// The monotone coupling produced an unordered pair. Always a bug.
    #[error("coupling order violated at step {step}, position {position}")]
    OrderViolated { step: u64, position: usize },
}

pub type Result<T> = std::result::Result<T, SosError>;
