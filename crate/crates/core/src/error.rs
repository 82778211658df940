use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unseen n-gram: {0}")]
    UnseenNgram(String),

    #[error("span ({start}, {end}) out of bounds for sequence of length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("degenerate embedding")]
    DegenerateEmbedding,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("sequence length {len} exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },

    #[error("not a ULRM checkpoint")]
    BadMagic,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl std::fmt::Display, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.to_string(), line, msg: msg.into() }
    }
}
