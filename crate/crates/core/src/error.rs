use thiserror::Error;

use crate::dataset::DatasetError;
use crate::engine::EngineError;
use crate::genset::GensetError;
use crate::learners::LearnerError;
use crate::metrics::MetricsError;
use crate::putmodel::PutModelError;
use crate::tools::ToolsError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    PutModel(#[from] PutModelError),
    #[error(transparent)]
    Genset(#[from] GensetError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Tools(#[from] ToolsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
