use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n-gram order {0} outside 1..=4")]
    InvalidOrder(usize),

    #[error("corpus has no videos")]
    EmptyCorpus,

    #[error("video `{0}` has no references")]
    EmptyReferences(String),

    #[error("no candidates to score")]
    EmptyCandidates,

    #[error("video `{0}` present on one side only")]
    IdMismatch(String),

    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: String,
        left: usize,
        right: usize,
    },

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{what}: {value} is not divisible by patch size {patch}")]
    NotDivisible {
        what: &'static str,
        value: u64,
        patch: u64,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid corpus stats: {0}")]
    InvalidStats(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate video id `{id}` ({location})")]
    DuplicateId { id: String, location: String },

    #[error("dataset invalid: {}", .0.join("; "))]
    InvalidDataset(Vec<String>),

    #[error("unknown split `{0}`")]
    UnknownSplit(String),

    #[error("predictions share no video ids with split `{0}`")]
    ZeroOverlap(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 input/parse, 3 alignment, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::DuplicateId { .. }
            | Error::InvalidDataset(_)
            | Error::InvalidStats(_)
            | Error::InvalidTensor(_)
            | Error::NotDivisible { .. }
            | Error::Io { .. }
            | Error::Json(_) => 2,
            Error::UnknownSplit(_)
            | Error::ZeroOverlap(_)
            | Error::IdMismatch(_)
            | Error::EmptyCandidates => 3,
            _ => 4,
        }
    }
}
