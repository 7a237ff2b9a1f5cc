use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Even the smallest marginal level overshoots the joint target.
    #[error(
        "infeasible adjustment: alpha_multiple at alpha*={min_alpha} is {achieved}, \
         above target {target} + threshold {threshold}"
    )]
    InfeasibleAdjustment {
        min_alpha: f64,
        achieved: f64,
        target: f64,
        threshold: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
