use super::{integrate_fermi_window, FermiWindow, QuadratureSpec, Reference};
use crate::constants::K_B;
use crate::error::{Error, Result};
use crate::occupation::occupation;

/// Euler gamma function.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Complete Fermi-Dirac integral
/// `F_k(eta) = 1/Gamma(k+1) * int_0^inf chi^k / (1 + exp(chi - eta)) dchi`.
pub fn fermi_integral(k: f64, eta: f64) -> Result<f64> {
    if !(k > -1.0) || !k.is_finite() {
        return Err(Error::Domain(format!("Fermi integral order must exceed -1, got {k}")));
    }
    if !eta.is_finite() {
        return Err(Error::Domain(format!("Fermi integral argument must be finite, got {eta}")));
    }
    // x = u^m turns chi^k dchi into m u^(m(k+1)-1) du; pick m to make that
    // exponent non-negative.
    let endpoint_power = (1.0 / (k + 1.0)).ceil().max(2.0);
    let spec = QuadratureSpec {
        rel_tol: 1e-13,
        abs_tol: 1e-15,
        ..QuadratureSpec::default()
    };
    let window = FermiWindow {
        edge: eta,
        width: 1.0,
        endpoint_power,
    };
    let integral = integrate_fermi_window(
        |chi| {
            if chi == 0.0 {
                return 0.0;
            }
            chi.powf(k) * occupation(chi - eta)
        },
        0.0,
        window,
        &spec,
        Reference::AbsIntegral,
    )?;
    Ok(integral.value / gamma(k + 1.0))
}

/// Bose-Einstein occupation `1 / (exp(hbar_omega / k_B T) - 1)`.
pub fn bose_occupation(hbar_omega: f64, lattice_temperature: f64) -> Result<f64> {
    if !(hbar_omega > 0.0) || !hbar_omega.is_finite() {
        return Err(Error::Domain(format!("phonon energy must be > 0, got {hbar_omega:e}")));
    }
    if !(lattice_temperature > 0.0) || !lattice_temperature.is_finite() {
        return Err(Error::Domain(format!(
            "lattice temperature must be > 0, got {lattice_temperature}"
        )));
    }
    Ok(1.0 / (hbar_omega / (K_B * lattice_temperature)).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_zero_is_softplus() {
        let v = fermi_integral(0.0, 0.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-13);
        let v = fermi_integral(0.0, 3.0).unwrap();
        assert!((v - (1.0 + 3.0f64.exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_limit() {
        let v = fermi_integral(0.5, -10.0).unwrap();
        assert!((v / (-10.0f64).exp() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn negative_half_order() {
        // F_{-1/2}(-20) ~ e^-20 (1 - e^-20 / sqrt 2)
        let v = fermi_integral(-0.5, -20.0).unwrap();
        let e = (-20.0f64).exp();
        let series = e * (1.0 - e / 2f64.sqrt());
        assert!((v / series - 1.0).abs() < 1e-11);
    }

    #[test]
    fn order_domain() {
        assert!(fermi_integral(-1.0, 0.0).is_err());
        assert!(fermi_integral(0.5, f64::NAN).is_err());
    }

    #[test]
    fn bose_values() {
        let t = 300.0;
        let n = bose_occupation(K_B * t * std::f64::consts::LN_2, t).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
        let n = bose_occupation(10.0 * K_B * t, t).unwrap();
        assert!((n - 1.0 / (10.0f64.exp() - 1.0)).abs() < 1e-18);
        assert!(bose_occupation(0.0, t).is_err());
        assert!(bose_occupation(-1.0, t).is_err());
        assert!(bose_occupation(1e-21, 0.0).is_err());
    }
}
