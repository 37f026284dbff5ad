//! Semi-infinite energy quadrature and the Fermi-Dirac special functions.
//!
//! Every moment, flux and production integral in the crate reduces to a
//! one-dimensional integral over energy with an integrand of the form
//! `g(x) * occupation(eta0 + eta1 * x)`. The integrator here is a globally
//! adaptive 21-point Gauss-Kronrod scheme that starts from a partition aware
//! of the Fermi edge `x = -eta0 / eta1`, maps the lower end through a power
//! substitution (removing `sqrt(x)` density-of-states cusps) and the upper
//! end through a rational map onto `[0, 1)`.

mod fermi;
mod gauss_kronrod;

pub use fermi::{bose_occupation, fermi_integral, gamma};
pub use gauss_kronrod::{
    integrate, integrate_fermi_window, integrate_semi_infinite, FermiWindow, Reference,
};

use std::ops::{Add, Mul};

use crate::error::{Error, Result};

/// Tolerances and limits for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Relative tolerance on the integral.
    pub rel_tol: f64,
    /// Absolute tolerance; see [`Reference`] for how it is scaled.
    pub abs_tol: f64,
    /// Maximum number of interval bisections.
    pub max_subdivisions: usize,
    /// Decay lengths past the Fermi edge before the tail map takes over.
    pub truncation_margin: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 600,
            truncation_margin: 40.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::Domain(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        if !(self.abs_tol >= 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::Domain(format!("abs_tol must be >= 0, got {}", self.abs_tol)));
        }
        if self.max_subdivisions < 8 {
            return Err(Error::Domain(format!(
                "max_subdivisions must be >= 8, got {}",
                self.max_subdivisions
            )));
        }
        if !(self.truncation_margin > 0.0) || !self.truncation_margin.is_finite() {
            return Err(Error::Domain(format!(
                "truncation_margin must be > 0, got {}",
                self.truncation_margin
            )));
        }
        Ok(())
    }
}

/// An integral value together with its worst-case error bound.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate { value: 0.0, error: 0.0 };

    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

impl Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate::new(self.value + rhs.value, self.error + rhs.error)
    }
}

impl Mul<f64> for Estimate {
    type Output = Estimate;
    fn mul(self, rhs: f64) -> Estimate {
        Estimate::new(self.value * rhs, self.error * rhs.abs())
    }
}
