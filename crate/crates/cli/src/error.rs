use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] radar_forge::Error),
    #[error("{0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// Errors that stop a command before it produces output.
    pub const EXIT_INVOCATION: i32 = 2;
    /// Some frames failed; outputs for the rest were written.
    pub const EXIT_PARTIAL: i32 = 1;
}

pub type CliResult<T> = std::result::Result<T, CliError>;
