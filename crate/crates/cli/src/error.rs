use std::fmt;
use std::path::Path;

/// Failures grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 1.
    Usage(String),
    /// A numerical check missed its tolerance; exit code 2.
    Tolerance(String),
    /// A file could not be read, parsed or written; exit code 3.
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Tolerance(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<tugwedge::Error> for CliError {
    fn from(e: tugwedge::Error) -> Self {
        use tugwedge::Error::*;
        match e {
            NonConvergence(_) | QuadratureAccuracy { .. } | DegenerateStart { .. } | CriticalPoint(_) => {
                CliError::Tolerance(e.to_string())
            }
            Domain(_) | OutOfRange { .. } | OutsideDomain(..) | StrategyViolation(_) | Config(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}
