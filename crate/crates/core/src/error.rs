use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("empty geometry: {0}")]
    EmptyGeometry(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("grid resolution {0} is below the minimum of 16")]
    Resolution(usize),

    #[error("graph has {edges} edges, cycle enumeration is limited to fewer than {limit}")]
    EdgeLimit { edges: usize, limit: usize },

    #[error("graph has {vertices} vertices, exhaustive search is limited to {limit}")]
    SizeLimit { vertices: usize, limit: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("{object}: {stage} failed: {source}")]
    Stage {
        object: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches the pipeline stage and object id.
    pub fn at(self, object: &str, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                object: object.to_string(),
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Stage name, if the error came out of the pipeline.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}
