use std::fmt;

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or input files (exit 1).
    Usage(String),
    /// Output written, but some cases failed (exit 2).
    Partial(String),
    /// Anything else (exit 3).
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Partial(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Partial(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

pub fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn internal(e: impl fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Turns per-case failures into the exit-2 error, listing each one.
pub fn partial_if_any(what: &str, failures: &[(String, String)]) -> Result<(), CliError> {
    if failures.is_empty() {
        return Ok(());
    }
    eprintln!("{} case(s) failed during {what}:", failures.len());
    for (id, reason) in failures {
        eprintln!("  {id}: {reason}");
    }
    Err(CliError::Partial(format!("{} case(s) failed during {what}", failures.len())))
}
