use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 in {path}: {source}")]
    Encoding {
        path: String,
        #[source]
        source: std::str::Utf8Error,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("CPG document does not match the interchange schema: {0}")]
    CpgSchema(String),

    #[error("unsupported CPG {what} kind {kind:?}")]
    UnsupportedKind { what: &'static str, kind: String },

    #[error("token range [{start}, {end}) out of bounds for chunk of {len} tokens (node {node})")]
    Range {
        node: usize,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("non-finite value in {0}")]
    Numeric(&'static str),

    #[error("scoring failed for chunk {chunk_id}: {message}")]
    Scoring { chunk_id: usize, message: String },

    #[error("attention backend failed for chunk {chunk_id}, layer {layer}: {message}")]
    Attention {
        chunk_id: usize,
        layer: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI error object.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Encoding { .. } => "encoding",
            Error::Parameter(_) => "parameter",
            Error::Config(_) => "config",
            Error::CpgSchema(_) => "cpg_schema",
            Error::UnsupportedKind { .. } => "unsupported_kind",
            Error::Range { .. } => "range",
            Error::Numeric(_) => "numeric",
            Error::Scoring { .. } => "scoring",
            Error::Attention { .. } => "attention",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
