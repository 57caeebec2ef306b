use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid building: {0}")]
    InvalidBuilding(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid allocation input: {0}")]
    InvalidAllocInput(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("allocation infeasible at slot {slot}")]
    Infeasible { slot: usize },

    #[error("malformed data file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
