use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor extents do not line up for the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// An interface or synthesis spec violates one of its invariants.
    #[error("config error: {0}")]
    Config(String),

    /// Iterative solver ran out of its sweep budget.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// A binary file (feature file or model bundle) is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Dataset-level problem: bad labels, inconsistent dims, empty manifest.
    #[error("data error: {0}")]
    Data(String),

    /// Operation applied in the wrong order (unfitted PCA, stale cache).
    #[error("state error: {0}")]
    State(String),

    /// A manifest line failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Training produced a non-finite loss.
    #[error("divergence error: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class: 1 for validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape(_) | Error::Config(_) => 1,
            _ => 2,
        }
    }
}
