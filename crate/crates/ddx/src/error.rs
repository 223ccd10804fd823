use std::path::PathBuf;

use thiserror::Error;

use ddx_core::cohort::CohortError;
use ddx_core::dialogue::{ChannelError, DialogueError};
use ddx_core::metrics::MetricsError;
use ddx_core::neural::NeuralError;
use ddx_core::ontology::OntologyError;
use ddx_core::procedure::ParseError;
use ddx_core::rl::RlError;
use ddx_core::screener::ScreenerError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: weights file version {found} is not supported (this build reads version {supported})")]
    Version { path: PathBuf, found: u64, supported: u64 },
    #[error("{0}")]
    Config(String),
    #[error("{path}:{source}")]
    Procedure {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Screener(#[from] ScreenerError),
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), line, message: message.into() }
    }
}
