use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Every message starts with the variant name so that command-line users and
/// log scrapers can match on it.
#[derive(Debug, Error)]
pub enum GeoError {
    #[error("NonFiniteInput: matrix contains NaN or infinite entries")]
    NonFiniteInput,

    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),

    #[error("InvalidExponent: {0}")]
    InvalidExponent(String),

    #[error("InvalidExponents: need 1 <= p < q, got p = {p}, q = {q}")]
    InvalidExponents { p: f64, q: f64 },

    #[error("NotPsd: {0}")]
    NotPsd(String),

    #[error("OrderViolated: S is not below T in the PSD order (min eigenvalue of T - S = {min_eigenvalue:e})")]
    OrderViolated { min_eigenvalue: f64 },

    #[error("SingularCoefficient: coefficient matrix is numerically singular")]
    SingularCoefficient,

    #[error("DegenerateBasis: {0}")]
    DegenerateBasis(String),

    #[error("NoConvergence: {iters} iterations, best residual {best_residual:e}")]
    NoConvergence { iters: usize, best_residual: f64 },

    #[error("SampleTooSmall: sample size {sample_size} is below the subspace dimension {k}")]
    SampleTooSmall { sample_size: usize, k: usize },

    #[error("NotInSubspace: projection residual {residual:e}")]
    NotInSubspace { residual: f64 },

    #[error("TooLarge: {0}")]
    TooLarge(String),

    #[error("Disconnected: graph is not connected")]
    Disconnected,

    #[error("CollapsedPair: points {0} and {1} have identical images")]
    CollapsedPair(usize, usize),

    #[error("InvalidChain: {0}")]
    InvalidChain(String),

    #[error("NotAMartingale: {0}")]
    NotAMartingale(String),

    #[error("Parse: {0}")]
    Parse(String),

    #[error("Io: {0}")]
    Io(#[from] std::io::Error),

    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GeoError>;
