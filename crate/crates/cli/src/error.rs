use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] garch_omnibus::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use garch_omnibus::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Data(_) | CliError::Io { .. } => exit::DATA,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Core(e) => match e {
                E::InvalidOrder { .. }
                | E::InvalidParams(_)
                | E::InvalidBox(_)
                | E::InvalidArgument(_)
                | E::UnknownDgp(_) => exit::USAGE,
                E::NonFinite { .. } | E::LengthMismatch { .. } | E::InsufficientData { .. } => {
                    exit::DATA
                }
                E::Degenerate(_) | E::OmegaShrunk { .. } | E::Bootstrap(_) => exit::NUMERICAL,
            },
        }
    }
}
