use std::fmt;
use std::path::PathBuf;

use dicke_fcs::FcsError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or parameter values; exit code 2.
    Usage(String),
    /// A numerical check did not pass; exit code 1.
    Validation { quantity: String, detail: String },
    Io { path: PathBuf, source: std::io::Error },
    Core(FcsError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn validation(quantity: impl Into<String>, detail: impl Into<String>) -> Self {
        CliError::Validation {
            quantity: quantity.into(),
            detail: detail.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if is_input_error(e) => 2,
            _ => 1,
        }
    }
}

/// Errors that reject the inputs rather than a computation.
fn is_input_error(e: &FcsError) -> bool {
    matches!(
        e,
        FcsError::InvalidParameter { .. }
            | FcsError::Domain { .. }
            | FcsError::SizeCap { .. }
            | FcsError::UnknownReservoir(_)
            | FcsError::BranchMisuse { .. }
            | FcsError::DegenerateCouplings
            | FcsError::AffinityDivergence
    )
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Validation { quantity, detail } => {
                write!(f, "validation failed for {quantity}: {detail}")
            }
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FcsError> for CliError {
    fn from(e: FcsError) -> Self {
        match e {
            FcsError::Validation { quantity, detail } => CliError::Validation { quantity, detail },
            e => CliError::Core(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
