use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum W2cError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {msg} (byte offset {offset})", path.display())]
    Format { path: PathBuf, offset: u64, msg: String },

    #[error("{}: malformed JSON header: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Dataset { path: PathBuf, line: usize, msg: String },

    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] w2c_core::Error),
}

impl W2cError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        W2cError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, offset: u64, msg: impl Into<String>) -> Self {
        W2cError::Format { path: path.into(), offset, msg: msg.into() }
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            W2cError::Io { .. } => 3,
            W2cError::Format { .. } | W2cError::Json { .. } => 4,
            W2cError::Dataset { .. } => 5,
            W2cError::Mismatch(_) => 6,
            W2cError::Config(_) => 2,
            W2cError::Core(_) => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, W2cError>;
