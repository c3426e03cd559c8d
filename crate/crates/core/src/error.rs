use thiserror::Error;

/// Errors surfaced by the library. Numerical blow-up during integration is
/// reported through `TerminalStatus::BlowUp`, not through this type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed inputs: dimension mismatches, bad parameters, unparseable specs.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A quotient like 1/x or ln(x) was requested on or too close to the
    /// simplex boundary.
    #[error("boundary: {0}")]
    Boundary(String),

    /// The operation only supports single-population portraits
    /// (2-player symmetric games with 3 strategies).
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
