//! Crate-level error type.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::catalogue::CatalogueError;
use crate::format::ParseError;
use crate::measures::MeasureError;
use crate::prioritiser::PriorityError;
use crate::telemetry::WindowError;
use crate::workspace::WorkspaceError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Catalogue(#[from] CatalogueError),
    #[error(transparent)]
    Priority(#[from] PriorityError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
