use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("item id {id} out of range (n_items = {n_items})")]
    ItemOutOfRange { id: u64, n_items: usize },

    #[error("record has {len} item(s); masking needs at least 2")]
    RecordTooSmall { len: usize },

    #[error("cannot split {records} record(s) into {folds} folds")]
    InvalidFolds { records: usize, folds: usize },

    #[error("item {item} is part of the context")]
    ContextOverlap { item: u32 },

    #[error("record covers every item, no negatives can be drawn")]
    EmptyComplement,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid layer spec {0:?}")]
    LayerSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty test set")]
    EmptyTestSet,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
