use std::path::{Path, PathBuf};

use thiserror::Error;

/// Exit status for configuration, specification and I/O failures.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for data-dependent failures such as an empty prior.
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: priorfill::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Typed name printed on stderr.
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::Core { source, .. } => source.name(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use priorfill::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Core { source, .. } => match source {
                E::EmptyPrior
                | E::EmptyEvaluationSet
                | E::NotEnoughPixels { .. }
                | E::NoSamples
                | E::Degenerate
                | E::Empty
                | E::NonPositiveDepth { .. }
                | E::NonPositiveValue { .. }
                | E::DimensionMismatch { .. } => EXIT_DATA,
                _ => EXIT_CONFIG,
            },
        }
    }
}

/// Attaches a human-readable location to core errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for priorfill::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}
