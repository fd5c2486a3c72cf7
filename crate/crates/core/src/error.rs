//! Error type shared across the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("graymap: {0}")]
    Graymap(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("unknown shape: {0}")]
    UnknownShape(String),

    #[error("config: {0}")]
    Config(String),

    #[error("object repository is empty")]
    EmptyRepository,

    #[error("candidate patch is all zero")]
    ZeroVector,

    #[error("stored map has no nonzero entries")]
    ZeroMap,

    #[error("wave schedule exhausted")]
    ScheduleExhausted,

    #[error("tile ({0}, {1}) already fired")]
    PromoteFired(usize, usize),

    #[error("usage ledger has zero total count")]
    ZeroUsage,

    #[error("duplicate stimulus index {0}")]
    DuplicateStimulus(usize),

    #[error("{stage} failed on stimulus {index}: {source}")]
    Stage {
        stage: &'static str,
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_stage(self, stage: &'static str, index: usize) -> Error {
        Error::Stage {
            stage,
            index,
            source: Box::new(self),
        }
    }

    /// Stable process exit code for the CLI, by failing stage.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Stage { stage, .. } => match *stage {
                "stimulus" => 3,
                "v1" => 4,
                "v4" => 5,
                "waves" => 6,
                "it" => 7,
                "coding" => 8,
                "development" => 9,
                "export" => 10,
                _ => 1,
            },
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}
