use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite sample at node {index}")]
    NonFinite { index: usize },

    #[error("degenerate fiber coefficients: a = b = 0 has no mountain geometry")]
    DegenerateFiber,

    #[error("no sign change of the fiber Pohozaev function below mu = {limit:e}")]
    NoFiberZero { limit: f64 },

    #[error("shooting failed: {reason} (last bracket [{lo}, {hi}])")]
    ShootingFailed { reason: String, lo: f64, hi: f64 },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cross-check mismatch: {0}")]
    CrossCheck(String),

    #[error("inconsistent result: {0}")]
    Inconsistent(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
