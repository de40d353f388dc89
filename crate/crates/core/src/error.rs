use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IbgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point {value} lies outside the domain {domain}")]
    OutOfDomain { value: f64, domain: String },
    #[error("quadrature did not converge for entry ({j},{k}), error estimate {estimate:e}")]
    QuadratureFailure { j: usize, k: usize, estimate: f64 },
    #[error("recurrence divides by a vanishing coefficient at n = {n}")]
    VanishingCoefficient { n: usize },
    #[error("integration failed at {location}: {reason}")]
    Integration { location: String, reason: String },
    #[error("square-root branch lost at {location}: argument {argument:e}")]
    Branch { location: String, argument: f64 },
    #[error("trace residual {residual:e} exceeds {limit:e}; increase the quadrature order")]
    TraceResidual { residual: f64, limit: f64 },
    #[error("numerical overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, IbgError>;
