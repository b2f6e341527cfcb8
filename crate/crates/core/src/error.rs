use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what}: expected length {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("simulation became unstable at frame {frame}: {detail}")]
    Unstable { frame: u64, detail: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("replay diverges from its log at frame {0}")]
    ReplayMismatch(u64),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by what the user asked for rather than by the run.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::UnknownScenario(_) | Error::NotFound(_))
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        let path = path.as_ref();
        if source.kind() == std::io::ErrorKind::NotFound {
            return Error::NotFound(path.to_path_buf());
        }
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
