//! Crate-wide error type.

/// Errors surfaced by circuits, memories, environments and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or mismatched dimensions.
    #[error("configuration error: {0}")]
    Config(String),

    /// A state value left the numerically sane range during settling.
    #[error("numerical divergence in {context}: |value| reached {value:.3e}")]
    Divergence { context: &'static str, value: f64 },

    /// An operation that requires stored traces was called on an empty memory.
    #[error("instance memory is empty")]
    EmptyMemory,

    /// Episode sampling was requested but no episode starts are recorded.
    #[error("cannot sample: start buffer is empty")]
    CannotSample,

    /// An environment or agent was driven outside its step protocol.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }
}
