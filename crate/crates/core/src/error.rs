use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("topology has no DUs")]
    EmptyTopology,
    #[error("distances out of order: {0}")]
    OrderingViolation(String),
    #[error("PLD threshold must be >= 1 (linear), got {0}")]
    InvalidThreshold(f64),
    #[error("CM ratio of 1 maps to an infinite PLD threshold")]
    InfiniteThreshold,
    #[error("serving set is empty")]
    EmptyServingSet,
    #[error("no samples requested")]
    NoSamples,
    #[error("server not operable: utilization {rho} >= 1")]
    NotOperable { rho: f64 },
    #[error("queue unstable: offered load {rho} >= 1")]
    Unstable { rho: f64 },
    #[error("numerics: {what} (error estimate {estimate:e})")]
    Numerics { what: String, estimate: f64 },
}
