use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AtemError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AtemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("duplicate doc_id {id:?} (records {first} and {second})")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("{dangling} of {total} citation edges reference unknown documents; id spaces probably do not match")]
    TooManyDangling { dangling: usize, total: usize },

    #[error("vocabulary is empty; no token reaches the minimum count")]
    EmptyVocabulary,

    #[error("vector dimension mismatch: expected {expected}, found {found} ({context})")]
    DimMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("missing: {artifact} (run `atem {stage}` first)")]
    Missing { artifact: String, stage: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("word vectors are unavailable for loaded embeddings; use the c-TF-IDF representation instead")]
    MissingWordVectors,

    #[error("zero-norm vector passed to cosine distance")]
    ZeroNorm,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AtemError {
    /// Process exit code: 2 for a missing upstream artifact, 3 for a
    /// rejected parameter, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            AtemError::Missing { .. } => 2,
            AtemError::InvalidParam(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AtemError::Io {
            path: path.into(),
            source,
        }
    }
}
