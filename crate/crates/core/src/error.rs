use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    /// The recursion kept descending past the configured cap. No value is
    /// produced: returning a truncated sample would bias the output.
    #[error("recursion exceeded max depth {max_depth} without halting")]
    DepthExceeded { max_depth: u64 },

    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("state space has {size} states, enumeration limit is {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },

    #[error("update is not monotone: bottom chain passed top chain at step {step}")]
    MonotonicityViolation { step: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("stationary system is singular (chain is reducible)")]
    SingularSystem,

    #[error(
        "{total} observations is too few: need at least {required:.1} for 5 expected per cell"
    )]
    InadequateCounts { total: u64, required: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid probability table: {0}")]
    InvalidTable(String),
}

impl SimError {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        SimError::Domain {
            name,
            value,
            expected,
        }
    }
}
