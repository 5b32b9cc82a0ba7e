//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation's inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An external provider (TTS, ASR, LLM, emotion classifier) failed.
    /// `payload` carries the raw response body when one was received.
    #[error("provider error ({provider}): {message}")]
    Provider {
        provider: String,
        message: String,
        payload: Option<String>,
    },

    /// Every candidate in a generated batch failed validation.
    #[error("empty batch: {0}")]
    EmptyBatch(String),

    /// An operation was refused by policy (e.g. preference pairs from an
    /// evaluation-only manifest without an explicit override).
    #[error("policy violation: {0}")]
    PolicyViolation(String),

    /// A constructed item failed its post-build check. Logged and skipped,
    /// never fatal to a batch build.
    #[error("item rejected: {0}")]
    RejectedItem(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents (manifest, dump, config, responses).
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn provider(provider: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Provider {
            provider: provider.into(),
            message: message.into(),
            payload: None,
        }
    }

    pub fn provider_with_payload(
        provider: impl Into<String>,
        message: impl Into<String>,
        payload: impl Into<String>,
    ) -> Self {
        Error::Provider {
            provider: provider.into(),
            message: message.into(),
            payload: Some(payload.into()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
