use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument or record violated a domain invariant.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Quadrature(#[from] QuadratureError),

    /// The propagation lost the determinant identity, or a step failed.
    #[error("integration error at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// `I + D C_t` (or the propagator) could not be inverted reliably.
    #[error("singular matrix: condition number {condition:e} exceeds {limit:e}")]
    SingularMatrix { condition: f64, limit: f64 },

    /// A phase-space grid is too coarse for the interference fringes it covers.
    #[error("grid resolution error: {0}")]
    Resolution(String),
}

/// Failure of the adaptive quadrature to meet its tolerance.
#[derive(Debug, Clone, PartialEq, Error)]
#[error(
    "quadrature did not converge after {panels} panels: error estimate {error_estimate:e} \
     (target {target:e}), worst panel [{worst_lo}, {worst_hi}]"
)]
pub struct QuadratureError {
    pub panels: usize,
    pub error_estimate: f64,
    pub target: f64,
    pub worst_lo: f64,
    pub worst_hi: f64,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
