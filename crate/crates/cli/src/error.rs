use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, parameters or configuration.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input data failed validation.
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] epbh::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                epbh::Error::Numerical(_) => 4,
                epbh::Error::Dimension { .. } | epbh::Error::Validation(_) => 3,
                epbh::Error::Domain(_) | epbh::Error::UnknownProcedure { .. } | epbh::Error::NonMonotone => 2,
            },
        })
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| format!(" at line {}", p.line())).unwrap_or_default();
        CliError::Data(format!("malformed CSV{line}: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
