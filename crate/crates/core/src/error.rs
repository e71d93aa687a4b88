use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to parse scenario document: {0}")]
    Parse(String),

    #[error("invalid value at `{path}`: {reason}")]
    Invalid { path: String, reason: String },

    #[error("queuing stability violated at `{path}`: mu_j ({mu}) must exceed lambda_i ({lambda})")]
    QueueUnstable { path: String, mu: f64, lambda: f64 },

    #[error("degenerate link geometry: transmitter and receiver coincide")]
    DegenerateGeometry,

    #[error("direction vector is zero")]
    ZeroDirection,

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("missing channel for {0}")]
    MissingChannel(String),

    #[error("SINR must be non-negative, got {0}")]
    NegativeSinr(f64),

    #[error("{source_name}:{line}: {reason}")]
    Csv {
        source_name: String,
        line: u64,
        reason: String,
    },

    #[error("SNR trace references unknown node ids {0:?}")]
    UnknownNodes(Vec<u32>),

    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("run `{run}` failed: {source}")]
    Run {
        run: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(context: &'static str, expected: impl std::fmt::Display, got: impl std::fmt::Display) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
