//! Energy-space integration over a band, weighted by a Fermi window.

use crate::dispersion::{DispersionModel, Shell};
use crate::error::Result;
use crate::quadrature::{integrate_fermi_window, Estimate, FermiWindow, QuadratureSpec, Reference};

/// `int_{eps_min}^inf g(eps, shell(eps)) deps` in SI units, with nodes placed
/// around the Fermi edge of `exp(eta0 + eta1 eps / kT)`.
///
/// `g` receives the reduced energy `x = eps / kT` and the shell quantities.
pub(crate) fn band_integral<F>(
    model: &DispersionModel,
    eta0: f64,
    eta1: f64,
    spec: &QuadratureSpec,
    g: F,
) -> Result<Estimate>
where
    F: Fn(f64, &Shell) -> f64,
{
    let kt = model.thermal_energy();
    let lower = model.band_minimum() / kt;
    let window = FermiWindow::from_multipliers(eta0, eta1);
    let estimate = integrate_fermi_window(
        |x| {
            let shell = model.shell(x * kt);
            g(x, &shell)
        },
        lower,
        window,
        spec,
        Reference::AbsIntegral,
    )?;
    Ok(estimate * kt)
}
