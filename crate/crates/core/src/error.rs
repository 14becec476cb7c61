use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid range: lo = {lo} must be below hi = {hi}")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite value {value} from the integrand at sample {index}")]
    Evaluation { index: usize, value: f64 },
    #[error("state blew up at step {step}")]
    BlowUp { step: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid sampling density: {0}")]
    InvalidDensity(String),
    #[error("allocation error: {0}")]
    Allocation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mean reversion not identified: beta1 = {beta1}")]
    MeanReversionUnidentified { beta1: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("objective is not finite at the starting point")]
    InvalidStart,
    #[error("rank-deficient diffusion factor{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    RankDeficient { step: Option<usize> },
    #[error("malformed input at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("model specification: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
