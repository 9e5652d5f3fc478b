use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input bytes are not well-formed JSON.
    #[error("ingest error at byte {offset}: {message}")]
    Ingest { offset: usize, message: String },

    /// A block violates a type invariant. `index` is the document-wide block index.
    #[error("validation error in block {index}: {message}")]
    BlockValidation { index: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// Export refused because the named invariant does not hold.
    #[error("invariant violated ({invariant}): {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    #[error("missing required field `{0}`")]
    MissingField(String),

    #[error("feature error from provider `{provider}` on block {block_id}: {message}")]
    Feature {
        provider: String,
        block_id: String,
        message: String,
    },

    #[error("scorer `{scorer}` failed on pair ({from} -> {to}): {message}")]
    Scorer {
        scorer: String,
        from: String,
        to: String,
        message: String,
    },

    #[error("element sets differ: {0}")]
    ElementMismatch(String),

    #[error("empty reference: {0}")]
    EmptyReference(&'static str),

    #[error("unparseable model response: {0}")]
    ModelResponse(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value at attention level {level}")]
    Numeric { level: usize },

    #[error("label `{0}` is not in the hierarchy")]
    UnknownLabel(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no replay fixture for cache key {cache_key}")]
    FixtureMissing { cache_key: String },

    #[error("model service error: {0}")]
    Service(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Byte offset of a serde_json error inside `raw`, derived from its line/column.
    pub(crate) fn ingest(raw: &[u8], err: &serde_json::Error) -> Self {
        let (line, column) = (err.line(), err.column());
        let mut offset = 0usize;
        if line > 0 {
            let mut current = 1usize;
            for (i, b) in raw.iter().enumerate() {
                if current == line {
                    offset = i;
                    break;
                }
                if *b == b'\n' {
                    current += 1;
                    offset = i + 1;
                }
            }
            offset += column.saturating_sub(1);
        }
        Error::Ingest {
            offset: offset.min(raw.len()),
            message: err.to_string(),
        }
    }
}
