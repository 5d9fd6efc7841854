use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("instance truth unknown in bag `{bag}`")]
    UnknownTruth { bag: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset contains no bags")]
    EmptyDataset,

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("training data is missing a class ({0})")]
    MissingClass(&'static str),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("bag `{0}` is not a negative bag")]
    NotNegativeBag(String),

    #[error("no negative bags supplied")]
    EmptyNegatives,

    #[error("threshold selection needs at least 2 negative bags, got {0}")]
    TooFewNegatives(usize),

    #[error("need more than {k} reference instances, got {got}")]
    TooFewReferences { k: usize, got: usize },

    #[error("stable instance pool is empty")]
    EmptyPool,

    #[error("bag `{0}` has no background tag")]
    MissingBackgroundTag(String),

    #[error("stub classifier has no entry for bag `{0}`")]
    UnknownBag(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by a bad configuration rather than bad data.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_))
    }
}
