use thiserror::Error;

/// Backend failures are split so the gateway knows what to retry.
#[derive(Debug, Error)]
pub enum BackendError {
    /// Timeouts, rate limits, connection resets. Retried with backoff.
    #[error("transient backend error: {0}")]
    Transient(String),
    /// Provider rejected the request outright; aborts the agent step.
    #[error("fatal backend error: {0}")]
    Fatal(String),
    /// Scripted mode ran out of matching transcript entries. Fatal.
    #[error("transcript exhausted after {calls_served} calls")]
    TranscriptExhausted { calls_served: usize },
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown pattern: {0}")]
    UnknownPattern(String),

    #[error("parse error: missing or malformed field `{0}`")]
    Parse(String),

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("invalid regex pattern `{pattern}`: {message}")]
    InvalidPattern { pattern: String, message: String },

    #[error("path escapes the target repository: {0}")]
    PathEscape(String),

    #[error("test command not allowlisted: {0}")]
    CommandNotAllowed(String),

    #[error("sandbox error: {0}")]
    Sandbox(String),

    #[error("network error: {0}")]
    Network(String),

    #[error("rate limited, retry after {retry_after_secs}s")]
    RateLimited { retry_after_secs: u64 },

    #[error("authentication failed: {0}")]
    Auth(String),

    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error("{count} reports still await triage")]
    UntriagedReports { count: usize },

    #[error("false-positive rate undefined over an empty report set")]
    DivisionUndefined,

    #[error("config error: {0}")]
    Config(String),

    #[error("state directory locked by another campaign: {0}")]
    StateDirLocked(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
