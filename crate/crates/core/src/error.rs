use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse value {text:?}: {reason}")]
    Parse { text: String, reason: String },

    #[error("degenerate instance: every value in scenario {id} is zero")]
    DegenerateInstance { id: u32 },

    #[error("accepted value {value} does not occur in scenario {id}")]
    NotAScenarioValue { id: u32, value: String },

    #[error("prediction error undefined: true value of candidate {index} is zero")]
    UndefinedPredictionError { index: usize },

    #[error("length mismatch: {left} values vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("precision exhausted: comparison still indeterminate at {digits} digits")]
    PrecisionExhausted { digits: u32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("invalid prior family: {}", .0.join("; "))]
    InvalidFamily(Vec<String>),

    #[error("unreachable information state {0}")]
    UnreachableState(String),

    #[error("policy has no action for reachable state {0}")]
    MissingState(String),

    #[error("exhaustive enumeration needs n <= {max}, got n = {n}; use Monte Carlo instead")]
    EnumerationTooLarge { n: usize, max: usize },

    #[error("nonpositive budget: mix_eps is not below beta")]
    NonpositiveBudget,

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("preset registry: {0}")]
    Registry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
