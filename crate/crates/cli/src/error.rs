use std::fmt::Display;
use std::path::Path;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// bad flags or flag values (64)
    Usage(String),
    /// input present but unusable (65)
    Data(String),
    /// input file missing or unreadable (66)
    Missing(String),
    /// some molecules failed and none succeeded (2)
    Partial(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Partial(_) => 2,
            CliError::Usage(_) => 64,
            CliError::Data(_) => 65,
            CliError::Missing(_) => 66,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Missing(m) | CliError::Partial(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn data(context: &str, e: impl Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))
}

pub fn require(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Missing(format!("{}: no such file", path.display())))
    }
}

pub fn write_output(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}
