use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown builtin game {0} (expected 1, 2 or 3)")]
    UnknownGame(u32),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("step size must be positive, got {0}")]
    StepSize(f64),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("degenerate coefficients: {0}")]
    Degenerate(String),

    #[error("marginal-stability residual {0:e} exceeds tolerance")]
    Residual(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit status for the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownGame(_) | Error::Parse { .. } | Error::Config(_) | Error::Io(_) => 2,
            Error::Domain(_)
            | Error::StepSize(_)
            | Error::NonConvergence(_)
            | Error::Degenerate(_)
            | Error::Residual(_) => 3,
            Error::InsufficientData(_) | Error::Bracket(_) => 4,
        }
    }
}
