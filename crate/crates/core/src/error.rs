use thiserror::Error;

pub type Result<T, E = BrqError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BrqError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model has no density")]
    NoDensity,

    #[error("operation not supported for this fading model: {0}")]
    UnsupportedModel(&'static str),

    #[error("empirical SNR trace exhausted after {0} samples")]
    TraceExhausted(usize),

    #[error("quadrature did not converge: estimated error {achieved:e} > requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("water level bisection failed: {0}")]
    BisectionFailure(String),

    #[error("decoding probability is zero, delay is unbounded")]
    InfiniteDelay,

    #[error("feedback budget of {feedback_bits} bits/slot does not exceed the mask entropy {entropy} bits")]
    InsufficientFeedback { feedback_bits: f64, entropy: f64 },

    #[error("feedback block needs {needed} bits but only {budget} are available")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("malformed feedback block: {0}")]
    DecodeError(String),

    #[error("backtrack chain broken at slot {slot}: {parity} parity bits < {required} required")]
    ChainBroken {
        slot: u64,
        parity: f64,
        required: f64,
    },

    #[error("replication {index}: {source}")]
    InReplication { index: usize, source: Box<BrqError> },
}

impl BrqError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        BrqError::InvalidInput(msg.into())
    }

    /// Innermost error, with replication context stripped.
    pub fn root(&self) -> &BrqError {
        match self {
            BrqError::InReplication { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            BrqError::QuadratureNonConvergence { .. } | BrqError::BisectionFailure(_)
        )
    }
}
