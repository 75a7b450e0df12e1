use thiserror::Error;

/// Errors raised anywhere in the refinement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid cutting: {0}")]
    InvalidCutting(String),

    #[error("zone {0} contains no observed cell")]
    UnidentifiableZone(usize),

    #[error("over-parameterized: {0}")]
    OverParameterized(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("unsupported strategy: {0}")]
    UnsupportedStrategy(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("handshake failed: {0}")]
    Handshake(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("indicator symmetry violated: residual {residual:e} exceeds {bound:e}")]
    SymmetryViolation { residual: f64, bound: f64 },

    #[error("config error on line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
