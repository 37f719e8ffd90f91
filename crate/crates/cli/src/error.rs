use igaodil::Error as LibError;
use std::fmt;
use std::path::Path;

/// Failure categories, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(LibError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub(crate) fn from_library_config(e: LibError) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<LibError> for CliError {
    /// Parameter errors are configuration problems; everything else is a
    /// numerical failure.
    fn from(e: LibError) -> Self {
        match e {
            LibError::InvalidDegree(_)
            | LibError::InvalidElementCount(_)
            | LibError::DegenerateInterval { .. }
            | LibError::TooFewCollocationPoints(_)
            | LibError::TooFewSamples(_)
            | LibError::GridTooSmall(_)
            | LibError::UnknownBenchmark(_)
            | LibError::MissingParameter { .. }
            | LibError::InvalidParameter(_)
            | LibError::InconsistentBoundaryData { .. }
            | LibError::InvalidRateInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
