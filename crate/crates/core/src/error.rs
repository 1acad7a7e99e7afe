use thiserror::Error;

/// Errors raised by the library. Each variant maps to a distinct failure
/// class so the CLI can pick an exit code and a machine-readable tag.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An argument outside the domain where the operation is defined,
    /// e.g. a Loewner comparison on a non-Hermitian matrix.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("enumeration too large: {0}")]
    Size(String),

    #[error("index out of range: {0}")]
    Index(String),

    /// The norm hypothesis ‖Xᵢ‖ ≤ L (or ‖μ‖ ≤ L) does not hold, so the
    /// concentration theory does not apply to the input.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable tag used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Unsupported(_) => "unsupported",
            Error::Size(_) => "size",
            Error::Index(_) => "index",
            Error::Hypothesis(_) => "hypothesis",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
