use thiserror::Error;

/// Exit code when a query ran but did not certify.
pub const EXIT_NOT_CERTIFIED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag values or unusable input files.
    #[error("{0}")]
    Input(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn from_core(e: deltacert::Error) -> Self {
        match e {
            deltacert::Error::Relaxation(_) => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Internal(m) => CliError::Internal(format!("{what}: {m}")),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

/// Rejects out-of-range flag values, naming the flag.
pub fn check(ok: bool, flag: &str, value: impl std::fmt::Display, expected: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Input(format!("invalid value '{value}' for '--{flag}': expected {expected}")))
    }
}
