use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("estimation failed: {0}")]
    Estimation(#[from] cindex_core::Error),
}

impl CliError {
    /// 1 for estimation failures, 2 for anything wrong with the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Estimation(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
