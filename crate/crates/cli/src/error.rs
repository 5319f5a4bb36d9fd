//! Error classes of the command line, each with its own exit code.

use std::path::PathBuf;

use thiserror::Error;
use tsad_core::agents::AgentError;
use tsad_core::detector::{BackendError, DetectorError};
use tsad_core::icl::IclError;
use tsad_core::pipeline::PipelineError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing input: {0} does not exist")]
    MissingInput(PathBuf),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("analysis failed: {0}")]
    Analysis(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("reference database: {0}")]
    Icl(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput(_) => 2,
            CliError::InvalidConfig(_) => 3,
            CliError::InvalidInput(_) => 4,
            CliError::Analysis(_) => 5,
            CliError::Backend(_) => 6,
            CliError::Output { .. } => 7,
            CliError::Icl(_) => 8,
        }
    }

    pub fn output(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        CliError::Backend(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Detector(DetectorError::Backend(b)) | PipelineError::Agent(AgentError::Backend(b)) => b.into(),
            other => CliError::Analysis(other.to_string()),
        }
    }
}

impl From<IclError> for CliError {
    fn from(e: IclError) -> Self {
        CliError::Icl(e.to_string())
    }
}

/// Exit codes, for `--help`.
pub const EXIT_CODES: &str = "Exit codes:
  0   success
  101 internal error (panic)
  2   missing input file or directory
  3   invalid configuration or flag value
  4   unreadable or malformed input data
  5   analysis, detection or evaluation failure
  6   completion backend unavailable or misconfigured
  7   output could not be written
  8   reference database could not be built or loaded
  64  command-line usage error";
