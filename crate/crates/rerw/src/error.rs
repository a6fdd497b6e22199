//! Error type shared across the crate.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Parameter construction failure; the message names the violated bound.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An analytic quantity was requested outside the regime where it exists.
    #[error("operation requires the {required} regime but parameters classify as {actual}")]
    WrongRegime {
        required: &'static str,
        actual: &'static str,
    },

    /// A gamma-function argument hit a pole (non-positive value).
    #[error("gamma-function pole: argument {name} = {value}")]
    GammaPole { name: &'static str, value: f64 },

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("checkpoint {checkpoint} outside valid range [1, {n_steps}]")]
    CheckpointOutOfRange { checkpoint: u64, n_steps: u64 },

    #[error("checkpoints must be strictly increasing")]
    CheckpointsNotIncreasing,

    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Pre-flight memory estimate exceeded the configured budget.
    #[error("estimated memory {estimated} bytes exceeds budget {budget} bytes")]
    ResourceBudget { estimated: usize, budget: usize },
}
