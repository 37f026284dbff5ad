//! Semiclassical maximum-entropy closure.
//!
//! The closed distribution is `w0 = 1 / (exp(xi) + 1) - sigma'(xi) eta2 . v`
//! with `xi = eta0 + eta1 eps / kT` and `sigma'(xi) = exp(xi) / (exp(xi) + 1)^2`,
//! i.e. the Fermi function expanded to first order in the anisotropy. All
//! moments are one-dimensional energy integrals over the band.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::band::band_integral;
use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};
use crate::occupation::{occupation, occupation_slope};
use crate::quadrature::{integrate, Estimate, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    Zeroth,
    Second,
}

/// Lagrange multipliers. `eta1` multiplies `eps / k_B T_L` and `eta2`
/// multiplies the group velocity (s/m).
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: DVector<f64>,
    pub order: Order,
}

impl Multipliers {
    pub fn zeroth(eta0: f64, eta1: f64, eta2: DVector<f64>) -> Self {
        Self {
            eta0,
            eta1,
            eta2,
            order: Order::Zeroth,
        }
    }

    pub fn second(eta0: f64, eta1: f64, eta2: DVector<f64>) -> Self {
        Self {
            eta0,
            eta1,
            eta2,
            order: Order::Second,
        }
    }

    /// Isotropic state at the lattice temperature.
    pub fn equilibrium(eta0: f64, dim: usize) -> Self {
        Self::zeroth(eta0, 1.0, DVector::zeros(dim))
    }

    /// `eta0 + eta1 * x` at reduced energy `x = eps / kT`.
    #[inline]
    pub fn xi(&self, x: f64) -> f64 {
        self.eta0 + self.eta1 * x
    }

    /// Sufficient condition for the linearized distribution to stay in
    /// `[0, 1]`: `|eta2| <= inf_eps (exp(xi) + 1) / (v_inf exp(xi)) = 1 / v_inf`.
    pub fn compatibility(&self, model: &DispersionModel) -> Compatibility {
        let norm = self.eta2.norm();
        let bound = match model.speed_bound() {
            Ok(v) => 1.0 / v,
            Err(_) => 0.0,
        };
        if norm <= bound {
            Compatibility::Satisfied
        } else {
            Compatibility::Violated { norm, bound }
        }
    }

    fn check(&self, model: &DispersionModel, order: Order) -> Result<()> {
        if self.order != order {
            return Err(Error::Precondition(format!(
                "expected {order:?} multipliers, got {:?}",
                self.order
            )));
        }
        if self.eta2.len() != model.dim() {
            return Err(Error::Domain(format!(
                "eta2 has {} components, band is {}-dimensional",
                self.eta2.len(),
                model.dim()
            )));
        }
        if !self.eta0.is_finite() || !self.eta1.is_finite() || self.eta2.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("multipliers must be finite".into()));
        }
        if order == Order::Zeroth && !(self.eta1 > 0.0) {
            return Err(Error::Domain(format!("eta1 must be > 0, got {}", self.eta1)));
        }
        Ok(())
    }

    pub(crate) fn check_zeroth(&self, model: &DispersionModel) -> Result<()> {
        self.check(model, Order::Zeroth)
    }

    pub(crate) fn check_second(&self, model: &DispersionModel) -> Result<()> {
        self.check(model, Order::Second)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compatibility {
    Satisfied,
    Violated { norm: f64, bound: f64 },
}

impl Compatibility {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, Compatibility::Satisfied)
    }
}

/// Quadrature error bounds attached to a [`MomentVector`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentErrors {
    pub n: f64,
    pub w: f64,
    pub j: f64,
}

/// Density (1/m^d), energy density (J/m^d) and momentum density.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub n: f64,
    pub w: f64,
    pub j: DVector<f64>,
    pub order: Order,
    pub errors: MomentErrors,
}

impl MomentVector {
    pub fn new(n: f64, w: f64, j: DVector<f64>, order: Order) -> Self {
        Self {
            n,
            w,
            j,
            order,
            errors: MomentErrors::default(),
        }
    }

    pub fn zero(dim: usize, order: Order) -> Self {
        Self::new(0.0, 0.0, DVector::zeros(dim), order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluxErrors {
    pub energy_flux: f64,
    pub pressure: f64,
    pub velocity_gradient: f64,
}

/// Energy flux `S`, pressure tensor `P = y int v (x) v w0` and velocity-gradient
/// tensor `G = y int w0 grad_p v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureFluxes {
    pub energy_flux: DVector<f64>,
    pub pressure: DMatrix<f64>,
    pub velocity_gradient: DMatrix<f64>,
    pub errors: FluxErrors,
}

/// `kappa` in `J = -kappa eta2`: `(y/d) int sigma'(xi) v^2 D deps`.
pub fn drift_coefficient(model: &DispersionModel, mult: &Multipliers, spec: &QuadratureSpec) -> Result<Estimate> {
    let y = model.phase_space_prefactor();
    let d = model.dim() as f64;
    let e = band_integral(model, mult.eta0, mult.eta1, spec, |x, s| {
        occupation_slope(mult.xi(x)) * s.speed * s.speed * s.dos
    })?;
    Ok(e * (y / d))
}

/// Positive-definite tensor `y int sigma'(xi) v (x) v dp`; isotropic by construction.
pub fn velocity_correlation(model: &DispersionModel, mult: &Multipliers, spec: &QuadratureSpec) -> Result<DMatrix<f64>> {
    let kappa = drift_coefficient(model, mult, spec)?;
    Ok(DMatrix::identity(model.dim(), model.dim()) * kappa.value)
}

/// Moments `(n, W, J)` of the zeroth-order closure.
pub fn constraints_forward(model: &DispersionModel, mult: &Multipliers, spec: &QuadratureSpec) -> Result<MomentVector> {
    mult.check_zeroth(model)?;
    let y = model.phase_space_prefactor();
    let kt = model.thermal_energy();
    let n = band_integral(model, mult.eta0, mult.eta1, spec, |x, s| occupation(mult.xi(x)) * s.dos)? * y;
    let w = band_integral(model, mult.eta0, mult.eta1, spec, |x, s| {
        x * occupation(mult.xi(x)) * s.dos
    })? * (y * kt);
    let (j, j_err) = if mult.eta2.iter().all(|&c| c == 0.0) {
        (DVector::zeros(model.dim()), 0.0)
    } else {
        let kappa = drift_coefficient(model, mult, spec)?;
        (-&mult.eta2 * kappa.value, kappa.error * mult.eta2.norm())
    };
    Ok(MomentVector {
        n: n.value,
        w: w.value,
        j,
        order: Order::Zeroth,
        errors: MomentErrors {
            n: n.error,
            w: w.error,
            j: j_err,
        },
    })
}

/// Energy flux, pressure and velocity-gradient tensors of the zeroth-order closure.
pub fn closure_fluxes(model: &DispersionModel, mult: &Multipliers, spec: &QuadratureSpec) -> Result<ClosureFluxes> {
    mult.check_zeroth(model)?;
    let dim = model.dim();
    let d = dim as f64;
    let y = model.phase_space_prefactor();
    let kt = model.thermal_energy();
    let identity = DMatrix::<f64>::identity(dim, dim);

    let (energy_flux, s_err) = if mult.eta2.iter().all(|&c| c == 0.0) {
        (DVector::zeros(dim), 0.0)
    } else {
        let s = band_integral(model, mult.eta0, mult.eta1, spec, |x, sh| {
            occupation_slope(mult.xi(x)) * x * sh.speed * sh.speed * sh.dos
        })? * (y * kt / d);
        (-&mult.eta2 * s.value, s.error * mult.eta2.norm())
    };
    let p = band_integral(model, mult.eta0, mult.eta1, spec, |x, sh| {
        occupation(mult.xi(x)) * sh.speed * sh.speed * sh.dos
    })? * (y / d);
    let g = band_integral(model, mult.eta0, mult.eta1, spec, |x, sh| {
        occupation(mult.xi(x)) * (sh.dspeed * sh.dos + (d - 1.0) * sh.dos_v_over_p)
    })? * (y / d);

    Ok(ClosureFluxes {
        energy_flux,
        pressure: &identity * p.value,
        velocity_gradient: &identity * g.value,
        errors: FluxErrors {
            energy_flux: s_err,
            pressure: p.error,
            velocity_gradient: g.error,
        },
    })
}

/// Derivative of `(n, W / kT)` with respect to `(eta0, eta1)`.
///
/// Entries are `-y int sigma' [1, x; x, x^2] D deps` with `x = eps / kT`;
/// symmetric and negative definite.
pub fn jacobian_2x2(model: &DispersionModel, mult: &Multipliers, spec: &QuadratureSpec) -> Result<Matrix2<f64>> {
    if !(mult.eta1 > 0.0) || !mult.eta0.is_finite() || !mult.eta1.is_finite() {
        return Err(Error::Domain(format!(
            "jacobian requires finite eta0 and eta1 > 0, got ({}, {})",
            mult.eta0, mult.eta1
        )));
    }
    let y = model.phase_space_prefactor();
    let moment = |k: i32| -> Result<f64> {
        let e = band_integral(model, mult.eta0, mult.eta1, spec, |x, s| {
            occupation_slope(mult.xi(x)) * x.powi(k) * s.dos
        })?;
        Ok(-y * e.value)
    };
    let a = moment(0)?;
    let b = moment(1)?;
    let c = moment(2)?;
    Ok(Matrix2::new(a, b, b, c))
}

/// Lowest energy density compatible with density `n`: the filled Fermi sea.
pub fn minimum_energy_density(model: &DispersionModel, n: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!("density must be > 0, got {n:e}")));
    }
    let y = model.phase_space_prefactor();
    let kt = model.thermal_energy();
    let (ball, dim) = match model.dim() {
        3 => (4.0 * PI / 3.0, 3),
        _ => (PI, 2),
    };
    let p_fermi = (n / (y * ball)).powf(1.0 / dim as f64);
    let shape = integrate(
        |t| model.energy_of_momentum(p_fermi * t) / kt * t.powi(dim - 1),
        0.0,
        1.0,
        spec,
    )?;
    Ok(y * ball * dim as f64 * p_fermi.powi(dim) * kt * shape.value)
}

/// Newton controls for [`invert_constraints`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    pub quadrature: QuadratureSpec,
    pub max_iterations: usize,
    /// Bound on `max(|n/n* - 1|, |W/W* - 1|)`.
    pub residual_tol: f64,
    /// Bound on the Euclidean norm of the last Newton step in `(eta0, eta1)`.
    pub step_tol: f64,
    pub max_halvings: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            quadrature: QuadratureSpec::default(),
            max_iterations: 50,
            residual_tol: 1e-8,
            step_tol: 1e-10,
            max_halvings: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub multipliers: Multipliers,
    pub iterations: usize,
    /// Final `max(|n/n* - 1|, |W/W* - 1|)`.
    pub residual: f64,
    pub compatibility: Compatibility,
}

struct Evaluation {
    log_residual: Vector2<f64>,
    relative: f64,
    jacobian: Matrix2<f64>,
}

fn evaluate(
    model: &DispersionModel,
    eta0: f64,
    eta1: f64,
    n_target: f64,
    w_target: f64,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let y = model.phase_space_prefactor();
    let probe = Multipliers::zeroth(eta0, eta1, DVector::zeros(model.dim()));
    let n = band_integral(model, eta0, eta1, spec, |x, s| occupation(probe.xi(x)) * s.dos)?.value * y;
    let w = band_integral(model, eta0, eta1, spec, |x, s| x * occupation(probe.xi(x)) * s.dos)?.value * y;
    if !(n > 0.0) || !(w > 0.0) {
        return Err(Error::Domain(format!(
            "moments underflow at eta0 = {eta0}, eta1 = {eta1}"
        )));
    }
    let jac = jacobian_2x2(model, &probe, spec)?;
    let scale = Matrix2::new(1.0 / n, 0.0, 0.0, 1.0 / w);
    let log_residual = Vector2::new((n / n_target).ln(), (w / w_target).ln());
    let relative = (n / n_target - 1.0).abs().max((w / w_target - 1.0).abs());
    Ok(Evaluation {
        log_residual,
        relative,
        jacobian: scale * jac,
    })
}

/// Maxwell-Boltzmann estimate of `(eta0, eta1)` from `n` and the reduced
/// energy density `w = W / kT`.
fn boltzmann_guess(model: &DispersionModel, n: f64, w: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let mean_target = w / n;
    let lower = model.band_minimum() / model.thermal_energy();
    if !(mean_target > lower) {
        return Err(Error::Unrealizable(format!(
            "mean energy {mean_target} kT does not exceed the band minimum {lower} kT"
        )));
    }
    // Boltzmann moments with the exponent shifted to the band minimum.
    let moments = |beta: f64| -> Result<(f64, f64)> {
        let z = band_integral(model, -beta * lower, beta, spec, |x, s| (-beta * (x - lower)).exp() * s.dos)?;
        let e = band_integral(model, -beta * lower, beta, spec, |x, s| {
            x * (-beta * (x - lower)).exp() * s.dos
        })?;
        Ok((z.value, e.value))
    };
    let mean = |beta: f64| -> Result<f64> {
        let (z, e) = moments(beta)?;
        Ok(e / z)
    };
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e3f64.ln());
    while mean(lo.exp())? < mean_target {
        lo -= 4.0;
        if lo < -60.0 {
            return Err(Error::Unrealizable(format!("mean energy {mean_target} kT is out of range")));
        }
    }
    while mean(hi.exp())? > mean_target {
        hi += 4.0;
        if hi > 60.0 {
            return Err(Error::Unrealizable(format!("mean energy {mean_target} kT is out of range")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean(mid.exp())? > mean_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let beta = (0.5 * (lo + hi)).exp();
    let (z, _) = moments(beta)?;
    let y = model.phase_space_prefactor();
    Ok(((y * z / n).ln() - beta * lower, beta))
}

/// Multipliers reproducing `target` (order Zeroth).
///
/// Damped Newton on `(ln n, ln W)` over `(eta0, eta1)`, followed by the
/// linear solve `J = -kappa eta2`.
pub fn invert_constraints(
    model: &DispersionModel,
    target: &MomentVector,
    guess: Option<&Multipliers>,
    options: &InversionOptions,
) -> Result<Inversion> {
    if target.order != Order::Zeroth {
        return Err(Error::Precondition("inversion target must be zeroth order".into()));
    }
    if !(target.n > 0.0) || !(target.w > 0.0) || !target.n.is_finite() || !target.w.is_finite() {
        return Err(Error::Domain(format!(
            "target needs n > 0 and W > 0, got n = {:e}, W = {:e}",
            target.n, target.w
        )));
    }
    if target.j.len() != model.dim() || target.j.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("target J must be a finite vector of the band dimension".into()));
    }
    let spec = &options.quadrature;
    let w_floor = minimum_energy_density(model, target.n, spec)?;
    if target.w <= w_floor {
        return Err(Error::Unrealizable(format!(
            "W = {:e} J/m^d is not above the Fermi-sea energy {:e} J/m^d for n = {:e}",
            target.w, w_floor, target.n
        )));
    }

    let kt = model.thermal_energy();
    let w_target = target.w / kt;
    let (mut eta0, mut eta1) = match guess {
        Some(g) if g.eta1 > 0.0 && g.eta0.is_finite() && g.eta1.is_finite() => (g.eta0, g.eta1),
        _ => boltzmann_guess(model, target.n, w_target, spec)?,
    };

    let mut current = evaluate(model, eta0, eta1, target.n, w_target, spec)?;
    let mut iterations = 0;
    loop {
        let step = current
            .jacobian
            .lu()
            .solve(&(-current.log_residual))
            .ok_or_else(|| Error::Conditioning("singular constraint jacobian".into()))?;
        if current.relative < options.residual_tol && step.norm() < options.step_tol {
            break;
        }
        if iterations >= options.max_iterations {
            return Err(Error::NewtonDivergence {
                iterations,
                eta0,
                eta1,
                residual: current.relative,
            });
        }
        iterations += 1;

        let norm = current.log_residual.norm();
        let mut lambda = 1.0;
        let mut accepted = None;
        for halving in 0..=options.max_halvings {
            let (t0, t1) = (eta0 + lambda * step[0], eta1 + lambda * step[1]);
            if t1 > 0.0 {
                if let Ok(trial) = evaluate(model, t0, t1, target.n, w_target, spec) {
                    let better = trial.log_residual.norm() < norm;
                    if better || halving == options.max_halvings {
                        accepted = Some((t0, t1, trial));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((t0, t1, trial)) => {
                eta0 = t0;
                eta1 = t1;
                current = trial;
            }
            None => {
                return Err(Error::NewtonDivergence {
                    iterations,
                    eta0,
                    eta1,
                    residual: current.relative,
                })
            }
        }
    }

    let mut multipliers = Multipliers::zeroth(eta0, eta1, DVector::zeros(model.dim()));
    if target.j.iter().any(|&c| c != 0.0) {
        let kappa = drift_coefficient(model, &multipliers, spec)?;
        multipliers.eta2 = -&target.j / kappa.value;
    }
    let compatibility = multipliers.compatibility(model);
    Ok(Inversion {
        multipliers,
        iterations,
        residual: current.relative,
        compatibility,
    })
}
