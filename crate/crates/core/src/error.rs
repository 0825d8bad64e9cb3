use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KanError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KanError {
    #[error("invalid spline basis: {0}")]
    InvalidBasis(String),

    #[error("invalid quantizer: {0}")]
    InvalidQuant(String),

    #[error("code {code} out of range for {bits}-bit quantizer")]
    CodeOutOfRange { code: u32, bits: u32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("fixed-point overflow: {0}")]
    Overflow(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("gradient cache does not match network: {0}")]
    CacheMismatch(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid vectors: {0}")]
    Vectors(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KanError {
    /// Stable machine-readable code, printed by the CLI in front of the message.
    pub fn code(&self) -> &'static str {
        match self {
            KanError::InvalidBasis(_) => "E_BASIS",
            KanError::InvalidQuant(_) => "E_QUANT",
            KanError::CodeOutOfRange { .. } => "E_CODE_RANGE",
            KanError::DimensionMismatch(_) => "E_DIM",
            KanError::Overflow(_) => "E_OVERFLOW",
            KanError::InvalidNetwork(_) => "E_NETWORK",
            KanError::CacheMismatch(_) => "E_CACHE",
            KanError::Training(_) => "E_TRAIN",
            KanError::Schema { .. } => "E_SCHEMA",
            KanError::InvalidGraph(_) => "E_GRAPH",
            KanError::Parse { .. } => "E_PARSE",
            KanError::Dataset(_) => "E_DATASET",
            KanError::Config(_) => "E_CONFIG",
            KanError::Vectors(_) => "E_VECTORS",
            KanError::Io { .. } => "E_IO",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KanError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        KanError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
