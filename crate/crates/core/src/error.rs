use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("rank deficient delay matrix: rank {rank} < {expected} generators")]
    RankDeficient { rank: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("integer overflow during exact elimination")]
    Overflow,
    #[error("multi-index of length {len} exceeds the cap {cap}")]
    DepthCap { len: u64, cap: u64 },
    #[error("search space of {size} choices exceeds the cap {cap}")]
    SearchCap { size: f64, cap: u64 },
    #[error("time {0} is not an exact rational")]
    InexactTime(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("state is not in the constraint space (residual {residual:.3e} > {tol:.1e})")]
    NotInConstraintSpace { residual: f64, tol: f64 },
    #[error("graph is not connected")]
    Disconnected,
    #[error("no qualifying path: the topology admits no periodic witness")]
    NoWitness,
    #[error("{0}")]
    Degenerate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
