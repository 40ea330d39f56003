use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A user reached a power update with nothing to transmit on.
    #[error("user {user} has no active (BS, sub-channel) entries")]
    NoActiveEntries { user: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
