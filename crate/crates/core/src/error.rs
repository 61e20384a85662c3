use thiserror::Error;

/// Error type shared across the crate.
///
/// The CLI maps these onto exit codes: configuration and argument problems
/// exit with 2, numerical failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate functional set: {0}")]
    Degenerate(String),

    #[error("sampler adaptation failed: {0}")]
    Adaptation(String),

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::Solver(_)
            | Error::Numerical(_)
            | Error::Degenerate(_)
            | Error::Adaptation(_)
            | Error::DiagnosticUnavailable(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
