use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Model(#[from] qbm::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for anything the user can fix in the configuration, 3 for numeric
    /// failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Model(qbm::Error::Domain(_) | qbm::Error::Resolution(_)) => 2,
            CliError::Model(_) => 3,
        }
    }

    pub(crate) fn message(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            other => other.to_string(),
        }
    }

    /// A hint printed after the error message, if there is one.
    pub fn guidance(&self) -> Option<&'static str> {
        match self {
            CliError::Model(qbm::Error::Resolution(_)) => {
                Some("increase grid_nq / grid_np or narrow grid_q / grid_p")
            }
            CliError::Model(qbm::Error::Integration { .. }) => Some("try a shorter t_max"),
            _ => None,
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
