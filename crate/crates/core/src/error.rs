use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("no records")]
    NoRecords,

    #[error("{0}")]
    Validation(String),

    #[error("unknown {kind} '{name}' (known: {known})")]
    UnknownStrategy { kind: &'static str, name: String, known: String },

    #[error("conditional probability undefined: label {0} never appears")]
    UndefinedConditional(usize),

    #[error("lift undefined: zero marginal count for label {0}")]
    UndefinedLift(usize),

    #[error("labels never appear in any prediction set: {}", .0.join(", "))]
    UncoveredLabels(Vec<String>),

    #[error("degenerate lift normalization: all off-diagonal lifts equal {0}")]
    DegenerateNormalization(f64),

    #[error("distance matrix contains a non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("empty evaluation set")]
    EmptyEvalSet,

    #[error("accuracy curves do not share a k grid: {0}")]
    MismatchedGrid(String),

    #[error("partitions cover different universes ({0} vs {1} items)")]
    UniverseMismatch(usize, usize),

    #[error("cache format: {0}")]
    Format(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse failure category; maps onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Io => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

impl Error {
    /// Tags the error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => ErrorKind::Io,
            Error::UndefinedConditional(_)
            | Error::UndefinedLift(_)
            | Error::UncoveredLabels(_)
            | Error::DegenerateNormalization(_)
            | Error::NonFinite { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Validation,
        }
    }
}
