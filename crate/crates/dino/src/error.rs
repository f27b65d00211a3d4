use std::path::PathBuf;
use std::process::ExitCode;

use dino_core::pipeline::PipelineError;
use dino_core::LmError;

/// Process exit statuses of the command-line tool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Success = 0,
    Io = 1,
    InvalidConfig = 2,
    BackendFailure = 3,
    /// Outputs were written but are incomplete.
    Partial = 4,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s.code())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DinoError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("backend: {0}")]
    Backend(String),
    #[error("{0}")]
    Pipeline(PipelineError),
}

impl DinoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DinoError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        DinoError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn status(&self) -> Status {
        match self {
            DinoError::Config(_) | DinoError::Format { .. } => Status::InvalidConfig,
            DinoError::Io { .. } => Status::Io,
            DinoError::Backend(_) => Status::BackendFailure,
            DinoError::Pipeline(e) => match e {
                PipelineError::Backend(_) | PipelineError::Sampler(_) => Status::BackendFailure,
                PipelineError::EmptyPool => Status::Partial,
                _ => Status::InvalidConfig,
            },
        }
    }
}

impl From<PipelineError> for DinoError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => DinoError::Config(c.to_string()),
            PipelineError::Instruction(i) => DinoError::Config(i.to_string()),
            e => DinoError::Pipeline(e),
        }
    }
}

impl From<LmError> for DinoError {
    fn from(e: LmError) -> Self {
        DinoError::Backend(e.to_string())
    }
}
