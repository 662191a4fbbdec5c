use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data file {name}: {message}")]
    Data { name: String, message: String },

    #[error("unknown task class: {0}")]
    UnknownTask(String),

    #[error("unknown variation: {0}")]
    UnknownVariation(String),

    #[error("insufficient parameter space for {task}: requested {requested} {pool} variations, only {available} distinct")]
    InsufficientParameterSpace {
        task: String,
        pool: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("variation count {count} for {task} is below the minimum of {minimum}")]
    TooFewVariations {
        task: String,
        count: usize,
        minimum: usize,
    },

    #[error("planner failed on {variation}: {reason}")]
    Planner { variation: String, reason: String },

    #[error("latest turn exceeds budget ({needed} pieces needed, {budget} available)")]
    LatestTurnExceedsBudget { needed: usize, budget: usize },

    #[error("invalid dialog turn: {0}")]
    InvalidTurn(String),

    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),

    #[error("empty training set")]
    EmptyTrainSet,

    #[error("completion request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },

    #[error("policy error: {0}")]
    Policy(String),

    #[error("no results to aggregate")]
    NoResults,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("run directory already exists: {}", .0.display())]
    RunExists(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
