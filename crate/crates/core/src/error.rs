use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Input(String),
    /// A pulse-train slot that cannot be realized by the hardware model.
    #[error("infeasible program: slot {slot}: {reason}")]
    Infeasible { slot: usize, reason: String },
    /// Squeezing/anti-squeezing levels that no lossy pure state produces.
    #[error("infeasible pair: {0}")]
    InfeasiblePair(String),
    #[error("no squeezing: {0}")]
    NoSqueezing(String),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Stable machine-readable tag, used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Input(_) => "input",
            Error::Infeasible { .. } => "infeasible",
            Error::InfeasiblePair(_) => "infeasible_pair",
            Error::NoSqueezing(_) => "no_squeezing",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
