use crate::ledger::SentenceId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("unknown sentence id {0}")]
    UnknownSentence(SentenceId),

    #[error("invalid cost {cost} for sentence {id}")]
    InvalidCost { id: SentenceId, cost: f64 },

    #[error("criterion not ready: {0}")]
    NotReady(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(String),

    #[error("{field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user configuration rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig { .. })
    }
}
