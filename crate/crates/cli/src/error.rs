use std::fmt;
use std::path::Path;

/// Process exit codes.
pub mod exit {
    pub const CONFIG: u8 = 2;
    pub const NUMERIC: u8 = 3;
    pub const FIT: u8 = 4;
    pub const AMBIGUOUS: u8 = 5;
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or input file content.
    Config(String),
    Numeric(String),
    Fit(String),
    Ambiguous(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
            CliError::Fit(_) => exit::FIT,
            CliError::Ambiguous(_) => exit::AMBIGUOUS,
        }
    }

    pub fn numeric(e: impl fmt::Display) -> Self {
        CliError::Numeric(e.to_string())
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// Failure to read `path`: content problems are input errors, anything
    /// else is I/O.
    pub fn reading(path: &Path, e: bst_core::io::FormatError) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Fit(m) => write!(f, "fit error: {m}"),
            CliError::Ambiguous(m) => write!(f, "phase selection failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
