use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error)]
pub enum Error {
    /// The model document or a configuration value is invalid.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Two pole anchors are closer than the clustering tolerance.
    #[error("pole anchors {i} and {j} coincide within tolerance ({distance:e})")]
    AnchorCollision { i: usize, j: usize, distance: f64 },

    /// Two values that must share the same anchor set do not.
    #[error("pole anchor mismatch")]
    AnchorMismatch,

    /// A polynomial part was present where a pure pole expansion is required.
    #[error("nonzero polynomial part where a pure pole sum is required")]
    NonzeroPolynomialPart,

    /// A solver failed to reach its tolerance.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// A linear system or matrix factorization was singular.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// An identity or consistency check exceeded its threshold.
    #[error("verification failed: {name}: residual {residual:e} exceeds {threshold:e}")]
    Verification { name: String, residual: f64, threshold: f64 },

    /// A computation needed more data than was supplied.
    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn verification(name: &str, residual: f64, threshold: f64) -> Self {
        Error::Verification { name: name.to_string(), residual, threshold }
    }
}
