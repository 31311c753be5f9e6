use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown dataset format {0:?} (expected jsonl or tsv)")]
    UnknownFormat(String),

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("duplicate uid {0:?}")]
    DuplicateUid(String),

    #[error("dataset uses a two-way label scheme ({0:?}); only three-way NLI labels are supported")]
    TwoWayLabels(String),

    #[error("text is empty after trimming")]
    EmptyText,

    #[error("invalid token {0:?}: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),

    #[error("sequence of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },

    #[error("no rearrangement of {0:?} moves every word")]
    NoDerangement(String),

    #[error("gave up after {attempts} draws while permuting {uid:?}")]
    RetriesExhausted { uid: String, attempts: usize },

    #[error("could only produce {got} of {wanted} distinct permutations for {uid:?}")]
    InsufficientPermutations { uid: String, wanted: usize, got: usize },

    #[error("clump of {clump} tokens leaves nothing to permute in a {len}-token sentence")]
    ClumpTooLarge { clump: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no prediction for uid {uid:?} perm_index {perm_index}")]
    MissingPrediction { uid: String, perm_index: u32 },

    #[error("duplicate prediction for uid {uid:?} perm_index {perm_index}")]
    DuplicatePrediction { uid: String, perm_index: u32 },

    #[error("{count} predictions missing, first: {first}")]
    MissingPredictions { count: usize, first: String },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("training set has an empty vocabulary")]
    EmptyVocabulary,

    #[error("tag sequence of length {tags} does not align with {tokens} tokens")]
    MisalignedTags { tokens: usize, tags: usize },

    #[error("unknown POS tag {0:?}")]
    UnknownTag(String),

    #[error("json: {0}")]
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
