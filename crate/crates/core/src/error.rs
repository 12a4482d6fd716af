use thiserror::Error;

pub type Result<T> = std::result::Result<T, DpError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("privacy budget exhausted: requested {requested}, remaining {remaining}")]
    Budget { requested: f64, remaining: f64 },

    /// No binomial tail cut reaches the required separation.
    #[error("infeasible separation in {context}: best achievable gap {achieved:.6e} < required {required:.6e}")]
    Infeasible { context: String, achieved: f64, required: f64 },

    #[error("domain mismatch: expected |X| = {expected}, found {found}")]
    DomainMismatch { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl DpError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        DpError::Parameter(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            DpError::Infeasible { .. } => 3,
            DpError::Budget { .. } => 4,
            DpError::Io(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for DpError {
    fn from(e: std::io::Error) -> Self {
        DpError::Io(e.to_string())
    }
}
