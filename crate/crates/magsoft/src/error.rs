use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("solver failure: {msg} (residual {residual:e})")]
    SolverFailure { msg: String, residual: f64 },
    #[error("config error{}: {msg}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Config { step: Option<usize>, msg: String },
    #[error("interlock: {0}")]
    Interlock(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("safety failure: {0}")]
    Safety(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn solver(msg: impl Into<String>, residual: f64) -> Self {
        Error::SolverFailure { msg: msg.into(), residual }
    }

    /// Process exit code for the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config { .. } | Error::Interlock(_) | Error::Refused(_) => 2,
            Error::SolverFailure { .. } => 3,
            Error::Safety(_) => 4,
            Error::Io(_) => 5,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
