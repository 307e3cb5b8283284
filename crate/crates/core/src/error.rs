use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed ASCII grid. Lines are 1-based.
    #[error("grid parse error at line {line}: {message}")]
    GridParse { line: usize, message: String },

    #[error("depth payload error at byte {offset}: {message}")]
    DepthFormat { offset: usize, message: String },

    #[error("{path}:{line}: {message}")]
    InputFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("stage `{stage}` failed for AOI {aoi}: {message}")]
    Stage {
        stage: &'static str,
        aoi: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn input_file(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::InputFile {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed or missing inputs (CLI exit code 1),
    /// false for failures inside a stage (exit code 2).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Stage { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
