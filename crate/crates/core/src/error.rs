use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its allowed range. `key` is the
    /// dotted path of the offending entry, e.g. `rewards.lambda`.
    #[error("invalid config value for `{key}`: {message}")]
    InvalidConfig { key: String, message: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error("world config produced only degenerate scenes after {attempts} attempts")]
    DegenerateConfig { attempts: usize },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("grammar error: {0}")]
    Grammar(String),

    #[error("ungrammatical question: {0}")]
    Ungrammatical(String),

    #[error("illegal action `{token}` in current state")]
    IllegalAction { token: String },

    #[error("no legal action in current state")]
    EmptyMask,

    #[error("object id {id} out of range for scene with {len} objects")]
    ObjectOutOfRange { id: usize, len: usize },

    #[error("goal reward undefined for zero rounds")]
    ZeroRounds,

    #[error("informativeness requires at least one answer")]
    NoAnswers,

    #[error("reward assembly: {0}")]
    RewardAssembly(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("game already finished")]
    GameFinished,

    #[error("non-finite gradient at epoch {epoch}, update {update}")]
    NonFiniteGradient { epoch: usize, update: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("record format error: {0}")]
    Format(String),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
