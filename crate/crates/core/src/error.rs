use thiserror::Error;

/// Attempt bookkeeping for the two independently sampled treatment strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct StratumTally {
    pub accepted: [u64; 2],
    pub attempted: [u64; 2],
}

impl StratumTally {
    /// Per-stratum acceptance rates. A stratum with no attempts counts as 1.
    pub fn rates(&self) -> [f64; 2] {
        let r = |i: usize| {
            if self.attempted[i] == 0 {
                1.0
            } else {
                self.accepted[i] as f64 / self.attempted[i] as f64
            }
        };
        [r(0), r(1)]
    }

    /// Joint acceptance rate: strata are independent so rates multiply.
    pub fn joint_rate(&self) -> f64 {
        let [a, b] = self.rates();
        a * b
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("at least {needed} samples are required, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("rejection budget exhausted after {tally:?} (required {required} accepted draws)")]
    BudgetExhausted { tally: StratumTally, required: usize },

    #[error("truncated normal on ({lo}, {hi}) has numerically zero mass")]
    EmptyTruncation { lo: f64, hi: f64 },

    #[error("posterior precision matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("generator gave up after {0} redraws")]
    GeneratorExhausted(usize),

    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
