use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("entity {0} is not a prey")]
    Kind(usize),
    #[error("episode already finished after {0} steps")]
    EpisodeDone(usize),
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("insufficient data: gathered {gathered} of {wanted} records")]
    InsufficientData { gathered: usize, wanted: usize },
    #[error("replay buffers misaligned: {0}")]
    Alignment(String),
    #[error("training aborted: non-finite {what} for agent {agent}")]
    Diverged { what: &'static str, agent: usize },
    #[error("profile report has zero total time")]
    EmptyReport,
    #[error("{0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            got,
        })
    }
}
