use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown term {0:?}")]
    UnknownTerm(String),
    #[error("empty term string")]
    EmptyTerm,
    #[error("duplicate term {0:?} in vocabulary")]
    DuplicateTerm(String),
    #[error("term id {id} out of range for a vocabulary of {len} terms")]
    TermOutOfRange { id: u32, len: usize },
    #[error("non-finite weight {weight} for term id {term}")]
    NonFinite { term: u32, weight: f64 },
    #[error("vectors come from different vocabularies")]
    VocabularyMismatch,
    #[error("cannot project onto a zero-norm vector")]
    DegenerateProjection,
    #[error("cosine similarity is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("negative weight {weight} on term id {term}: combined pseudo-terms need nonnegative weights")]
    NegativeWeight { term: u32, weight: f64 },
    #[error("invalid query {qid:?}: {reason}")]
    InvalidQuery { qid: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("duplicate document name {0:?}")]
    DuplicateDoc(String),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("metric undefined for query {0:?}: no positive relevance judgments")]
    UndefinedMetric(String),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt index file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::VocabularyMismatch | Error::Inconsistent(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
