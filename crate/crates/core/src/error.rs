use thiserror::Error;

/// Errors raised by the generator, the simulated cluster and the algorithms.
///
/// Recovery failures are ordinary values: sweeps record them as data rather
/// than aborting.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Param(String),

    #[error("insufficient space for {context}: need {needed} words, {available} available (short by {})", needed - available)]
    Capacity {
        context: String,
        needed: usize,
        available: usize,
    },

    #[error("model violation: {0}")]
    Model(String),

    #[error("send cap exceeded on machine {machine} in round {round}: {words} > {cap} words")]
    SendCap {
        machine: usize,
        round: usize,
        words: usize,
        cap: usize,
    },

    #[error("receive cap exceeded on machine {machine} in round {round}: {words} > {cap} words")]
    ReceiveCap {
        machine: usize,
        round: usize,
        words: usize,
        cap: usize,
    },

    #[error("memory cap exceeded on machine {machine} in round {round}: {words} > {cap} words")]
    MemoryCap {
        machine: usize,
        round: usize,
        words: usize,
        cap: usize,
    },

    #[error("recovery failed at {stage}: {detail}")]
    Recovery { stage: String, detail: String },

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn recovery(stage: &str, detail: impl Into<String>) -> Self {
        Error::Recovery {
            stage: stage.to_string(),
            detail: detail.into(),
        }
    }

    pub(crate) fn capacity(context: impl Into<String>, needed: usize, available: usize) -> Self {
        Error::Capacity {
            context: context.into(),
            needed,
            available: available.min(needed),
        }
    }

    /// Stage name for recovery failures, `None` for every other kind.
    pub fn failure_stage(&self) -> Option<&str> {
        match self {
            Error::Recovery { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
