use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest encoding error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad magic {0:?}, expected \"GDE1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported dataset version {got}, expected {expected}")]
    VersionMismatch { got: u8, expected: u8 },
    #[error("corrupt dataset: {0}")]
    Corrupt(String),
    #[error("insufficient {side} data: need {needed} transitions, have {available}")]
    Insufficient {
        side: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("requested {requested} transitions but the dataset holds only {available}")]
    Oversubscribed { requested: usize, available: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("need at least {needed} transitions for statistics, have {available}")]
    TooFewTransitions { needed: usize, available: usize },
    #[error("incompatible datasets: {0}")]
    Incompatible(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}
