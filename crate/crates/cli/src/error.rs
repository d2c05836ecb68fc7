use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {message}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "config".into()))]
    Parse {
        path: Option<PathBuf>,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("cannot set `{path}`: {message}")]
    InvalidPath { path: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("optimizer did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Model(#[from] multistrain_core::Error),
}

impl CliError {
    /// Process exit code: 2 for bad input, 3 for non-convergence, 4 for
    /// numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        use multistrain_core::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::InvalidPath { .. } => {
                2
            }
            CliError::NotConverged { .. } => 3,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
            CliError::Model(
                E::Integration { .. }
                | E::Solver { .. }
                | E::NegativeCompartment { .. }
                | E::InconsistentState { .. },
            ) => 4,
            CliError::Model(_) => 2,
        }
    }
}
