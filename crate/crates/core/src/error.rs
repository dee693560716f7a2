use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid comb: {0}")]
    InvalidComb(String),

    #[error("position {0} lies outside the comb window")]
    OutsideWindow(f64),

    #[error("query point {0} coincides with an atom position")]
    AtAtomPosition(f64),

    #[error("level {level} is below the representation floor {floor}")]
    BelowFloor { level: f64, floor: f64 },

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("rejection budget of {budget} proposals exhausted: {hint}")]
    BudgetExhausted { budget: u64, hint: String },

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by a hard resource limit rather than bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::ResourceCap(_) | Error::BudgetExhausted { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
