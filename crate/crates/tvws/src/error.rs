use std::path::PathBuf;

use crate::wire::ErrorBody;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Domain(#[from] tvws_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Transport(String),
    #[error("server replied {status}: {}", body.message)]
    Remote { status: u16, body: ErrorBody },
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 validation, 3 I/O, 4 domain.
    pub fn exit_code(&self) -> i32 {
        use tvws_core::Error as E;
        match self {
            AppError::Domain(E::Invalid { .. } | E::InvalidDistance(_) | E::UnknownPower(_)) => 2,
            AppError::Domain(_) => 4,
            AppError::Config(_) | AppError::Format { .. } => 2,
            AppError::Io { .. } | AppError::Transport(_) => 3,
            AppError::Remote { status, .. } => match status {
                422 => 2,
                400..=499 => 4,
                _ => 3,
            },
        }
    }
}
