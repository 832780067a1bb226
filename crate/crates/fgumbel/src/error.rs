use fgumbel_core::Error as CoreError;

/// Errors surfaced by the IO and CLI layer, each mapped to a process exit
/// code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad input data or invalid arguments.
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Data(_) | AppError::Config(_) => 2,
            AppError::Convergence(_) => 3,
            AppError::Io(_) | AppError::Other(_) => 1,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_)
            | CoreError::TooFewObservations { .. }
            | CoreError::RankDeficient { .. }
            | CoreError::Boundary(_) => AppError::Data(e.to_string()),
            CoreError::NonFiniteChain { .. } | CoreError::Singular { .. } | CoreError::Numerical(_) => {
                AppError::Convergence(e.to_string())
            }
        }
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Other(format!("json: {e}"))
    }
}

pub type AppResult<T> = Result<T, AppError>;
