use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the relation-detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("invalid sentence: {0}")]
    InvalidSentence(String),

    #[error("entity pair ({0}, {1}) has no relation annotation")]
    UnannotatedPair(usize, usize),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("entity spans cover {needed} tokens but the sequence length is {seq_len}")]
    WindowTooSmall { needed: usize, seq_len: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for a table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sequence contains no non-padding tokens")]
    EmptySequence,

    #[error("sequence length {len} is shorter than the widest window {window}")]
    SequenceTooShort { len: usize, window: usize },

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),

    #[error("no successful experiment results")]
    NoSuccessfulResult,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad or missing input data rather than by
    /// a failure during computation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::InvalidSentence(_)
                | Error::UnannotatedPair(..)
                | Error::EmptyCorpus
                | Error::WindowTooSmall { .. }
                | Error::SingleClass
                | Error::EmptyInput
                | Error::LengthMismatch { .. }
                | Error::Checkpoint(_)
                | Error::IncompleteGrid(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
