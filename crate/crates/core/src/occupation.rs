//! Overflow-safe Fermi-Dirac occupation factors.
//!
//! All functions take the exponent `xi` of the occupation
//! `f = 1 / (exp(xi) + 1)` and never evaluate `exp` of a positive argument.

/// `1 / (exp(xi) + 1)`.
#[inline]
pub fn occupation(xi: f64) -> f64 {
    if xi > 0.0 {
        let e = (-xi).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + xi.exp())
    }
}

/// `1 - occupation(xi) = exp(xi) / (exp(xi) + 1)`.
#[inline]
pub fn vacancy(xi: f64) -> f64 {
    occupation(-xi)
}

/// `exp(xi) / (exp(xi) + 1)^2`, the magnitude of `d occupation / d xi`.
#[inline]
pub fn occupation_slope(xi: f64) -> f64 {
    let e = (-xi.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupation_values() {
        assert_eq!(occupation(0.0), 0.5);
        assert!((occupation(1.0) - 1.0 / (1.0f64.exp() + 1.0)).abs() < 1e-16);
        assert_eq!(occupation(1000.0), 0.0);
        assert_eq!(occupation(-1000.0), 1.0);
        assert!(occupation(800.0).is_finite());
    }

    #[test]
    fn slope_is_symmetric_and_finite() {
        assert_eq!(occupation_slope(0.0), 0.25);
        for &x in &[0.3, 4.0, 30.0, 600.0] {
            assert_eq!(occupation_slope(x), occupation_slope(-x));
            let f = occupation(x);
            assert!((occupation_slope(x) - f * (1.0 - f)).abs() <= 1e-15 * occupation_slope(x) + 1e-300);
        }
    }
}
