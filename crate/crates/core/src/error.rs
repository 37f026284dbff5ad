//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The band has no finite speed bound (parabolic dispersion).
    #[error("speed is unbounded for the parabolic band")]
    UnboundedSpeed,

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    /// Moments that no Fermi-Dirac MEP state can reproduce.
    #[error("unrealizable moments: {0}")]
    Unrealizable(String),

    /// Newton iteration failed; carries the last iterate `(eta0, eta1)`.
    #[error("Newton inversion did not converge after {iterations} iterations (eta0={eta0}, eta1={eta1}, residual={residual:e})")]
    NewtonDivergence {
        iterations: usize,
        eta0: f64,
        eta1: f64,
        residual: f64,
    },

    /// A linear system is numerically singular.
    #[error("ill-conditioned linear system: {0}")]
    Conditioning(String),

    /// A required input is missing or has the wrong order.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Relaxation time cannot be defined (no momentum production).
    #[error("relaxation time undefined: {0}")]
    UndefinedRelaxationTime(String),
}
