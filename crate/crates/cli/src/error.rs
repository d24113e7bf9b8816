use std::fmt;

use covsev_core::cnn::CnnError;
use covsev_core::eval::EvalError;
use covsev_core::imaging::ImagingError;
use covsev_core::pipeline::PipelineError;
use covsev_core::svm::SvmError;

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config values. Exit 1.
    Usage(String),
    /// Unreadable or malformed inputs. Exit 2.
    Data(String),
    /// Training or numeric failure. Exit 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "training failed: {m}"),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CnnError> for CliError {
    fn from(e: CnnError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SvmError> for CliError {
    fn from(e: SvmError) -> Self {
        match e {
            SvmError::Io { .. }
            | SvmError::BadMagic
            | SvmError::UnsupportedVersion(_)
            | SvmError::Truncated(_)
            | SvmError::Format(_)
            | SvmError::DimensionMismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Training { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}
