use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ticks out of order: record {index} is earlier than the record before it")]
    UnsortedTicks { index: usize },

    #[error("invalid tick at record {index}: {reason}")]
    InvalidTick { index: usize, reason: String },

    #[error("empty series: {0}")]
    EmptySeries(String),

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("insufficient data for {what}: need {needed}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid calendar: {0}")]
    InvalidCalendar(String),

    #[error("no tradable-shares datum for stock {0}")]
    MissingShares(String),

    #[error("no return series for stock {0}")]
    MissingSeries(String),

    #[error("collinear design")]
    CollinearDesign,

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("mismatched datasets: {0}")]
    MismatchedData(String),

    #[error("stage `{stage}` failed for {entity}: {source}")]
    Stage {
        stage: &'static str,
        entity: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str, entity: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            entity: entity.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
