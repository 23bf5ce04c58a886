use thiserror::Error;

/// Errors raised by the solvers, metrics and I/O layers.
#[derive(Debug, Error)]
pub enum CcaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A whitening matrix could not be formed; usually fixed by a positive regularization.
    #[error("singular whitening: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// An iterate lost rank in the induced metric; restart from a different initialization.
    #[error("degenerate iterate: {0}")]
    Degenerate(String),

    #[error("iteration diverged: {0}")]
    Diverged(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CcaError>;
