use thiserror::Error;

/// Errors surfaced by the fusion library.
#[derive(Debug, Error)]
pub enum MimrfError {
    /// A caller violated an operation's input contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A document failed to parse or validate on ingestion.
    #[error("parse error: {0}")]
    Parse(String),

    /// File system failure while reading or writing an artifact.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The optimizer hit a non-finite objective value.
    #[error("non-finite objective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
}

impl MimrfError {
    pub fn contract(msg: impl Into<String>) -> Self {
        MimrfError::Contract(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        MimrfError::Parse(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, MimrfError>;
