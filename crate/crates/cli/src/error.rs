use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    BadData(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    /// 0 success, 2 non-convergence, 3 bad data, 4 config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NonConvergence(_) => 2,
            CliError::BadData(_) => 3,
            CliError::Config(_) | CliError::Io { .. } => 4,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}
