use std::fmt;

/// Failures surfaced by the command-line front end, each mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    /// The configuration did not parse or failed validation.
    Config { field: String, reason: String },
    /// An error raised by the library.
    Core(nidesign::Error),
    Io(String),
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        Self::Config { field: field.to_string(), reason: reason.into() }
    }

    pub fn config_owned(field: String, reason: impl Into<String>) -> Self {
        Self::Config { field, reason: reason.into() }
    }

    pub fn from_core(e: nidesign::Error) -> Self {
        Self::Core(e)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(nidesign::Error::Numerical(_)) => 3,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, reason } => write!(f, "config error in {field}: {reason}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<nidesign::Error> for CliError {
    fn from(e: nidesign::Error) -> Self {
        Self::Core(e)
    }
}
