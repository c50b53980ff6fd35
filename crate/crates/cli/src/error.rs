use std::fmt;

use tomosar::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DIVERGENCE: i32 = 3;
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: message.into(),
        }
    }

    /// Tags a failure to load a configuration-type input (geometry, solver
    /// config, parameters) as a usage error whatever its cause.
    pub fn config_input(what: &str, path: &std::path::Path, e: Error) -> Self {
        Self::usage(format!("cannot load {what} '{}': {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => exit::IO,
            Error::Divergence { .. } => exit::DIVERGENCE,
            _ => exit::USAGE,
        };
        let message = match &e {
            Error::Divergence { trace, .. } => format!("{e}\nobjective trace: {trace:?}"),
            _ => e.to_string(),
        };
        Self { code, message }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
