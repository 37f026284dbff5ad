//! Second-order (`hbar^2`) corrections to the maximum-entropy closure.
//!
//! The correction to the distribution is
//! `w2 = -sigma'(xi0) (xi2 + eta2_2 . v) + Psi`, where `Psi` collects the
//! products of spatial and momentum derivatives of `xi0 = eta0 + eta1 eps / kT`.
//! Spatial variation is one-dimensional along the first axis. Stored
//! second-order quantities already carry the physical `hbar^2`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::band::band_integral;
use crate::closure_zero::{drift_coefficient, jacobian_2x2, MomentErrors, MomentVector, Multipliers, Order};
use crate::constants::HBAR;
use crate::dispersion::{DispersionModel, Shell};
use crate::error::{Error, Result};
use crate::occupation::{occupation, occupation_slope};
use crate::quadrature::QuadratureSpec;

/// Boundary treatment for spatial finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    OneSidedExtrapolation,
}

/// Zeroth-order multipliers sampled on a uniform 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierField1D {
    x: Vec<f64>,
    eta0: Vec<f64>,
    eta1: Vec<f64>,
    eta2: Vec<DVector<f64>>,
    boundary: Boundary,
    spacing: f64,
}

/// Value, first and second spatial derivative of `eta0` and `eta1` at a point
/// (derivatives per metre).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfileDerivatives {
    pub eta0: [f64; 3],
    pub eta1: [f64; 3],
}

impl ProfileDerivatives {
    pub fn constant(eta0: f64, eta1: f64) -> Self {
        Self {
            eta0: [eta0, 0.0, 0.0],
            eta1: [eta1, 0.0, 0.0],
        }
    }

    fn is_homogeneous(&self) -> bool {
        self.eta0[1] == 0.0 && self.eta0[2] == 0.0 && self.eta1[1] == 0.0 && self.eta1[2] == 0.0
    }
}

const MIN_POINTS: usize = 5;

impl MultiplierField1D {
    pub fn new(
        x: Vec<f64>,
        eta0: Vec<f64>,
        eta1: Vec<f64>,
        eta2: Vec<DVector<f64>>,
        boundary: Boundary,
    ) -> Result<Self> {
        let len = x.len();
        if len < MIN_POINTS {
            return Err(Error::Domain(format!("field needs at least {MIN_POINTS} points, got {len}")));
        }
        if eta0.len() != len || eta1.len() != len || eta2.len() != len {
            return Err(Error::Domain("field arrays must have equal length".into()));
        }
        let dim = eta2[0].len();
        if eta2.iter().any(|v| v.len() != dim) {
            return Err(Error::Domain("eta2 entries must share one dimension".into()));
        }
        let all = x.iter().chain(&eta0).chain(&eta1).chain(eta2.iter().flat_map(|v| v.iter()));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field values must be finite".into()));
        }
        let spacing = (x[len - 1] - x[0]) / (len - 1) as f64;
        if !(spacing > 0.0) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        let span = x[len - 1] - x[0];
        for (i, w) in x.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Domain(format!("grid is not increasing at index {}", i + 1)));
            }
            if ((w[1] - w[0]) - spacing).abs() > 1e-12 * span {
                return Err(Error::Domain(format!("grid is not uniform at index {}", i + 1)));
            }
        }
        Ok(Self {
            x,
            eta0,
            eta1,
            eta2,
            boundary,
            spacing,
        })
    }

    /// Parses `x, eta0, eta1, eta2_1, ..., eta2_d` rows. Blank lines, `#`
    /// comments and a leading header row are skipped.
    pub fn from_csv(text: &str, dim: usize, boundary: Boundary) -> Result<Self> {
        let (mut x, mut eta0, mut eta1, mut eta2) = (vec![], vec![], vec![], vec![]);
        let mut seen_data = false;
        for (number, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if !seen_data => continue,
                Err(e) => {
                    return Err(Error::Domain(format!("field CSV line {}: {e}", number + 1)));
                }
            };
            if values.len() != 3 + dim {
                return Err(Error::Domain(format!(
                    "field CSV line {}: expected {} columns, got {}",
                    number + 1,
                    3 + dim,
                    values.len()
                )));
            }
            seen_data = true;
            x.push(values[0]);
            eta0.push(values[1]);
            eta1.push(values[2]);
            eta2.push(DVector::from_column_slice(&values[3..]));
        }
        Self::new(x, eta0, eta1, eta2, boundary)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn multipliers_at(&self, index: usize) -> Result<Multipliers> {
        self.check_index(index)?;
        Ok(Multipliers::zeroth(self.eta0[index], self.eta1[index], self.eta2[index].clone()))
    }

    /// Fourth-order derivatives at `index` and an estimate of their
    /// truncation error (the change the fourth-order stencil makes over the
    /// second-order one, expressed as a multiplier change across one cell).
    pub fn derivatives(&self, index: usize) -> Result<(ProfileDerivatives, f64)> {
        self.check_index(index)?;
        let h = self.spacing;
        let mut error: f64 = 0.0;
        let mut eval = |f: &[f64]| -> [f64; 3] {
            let (d1, d1_low) = first_derivative(f, index, h, self.boundary);
            let (d2, d2_low) = second_derivative(f, index, h, self.boundary);
            error = error.max(h * (d1 - d1_low).abs() + h * h * (d2 - d2_low).abs());
            [f[index], d1, d2]
        };
        let eta0 = eval(&self.eta0);
        let eta1 = eval(&self.eta1);
        Ok((ProfileDerivatives { eta0, eta1 }, error))
    }

    /// Reflection `x -> -x` about the grid centre.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        out.eta0.reverse();
        out.eta1.reverse();
        out.eta2.reverse();
        for v in &mut out.eta2 {
            v[0] = -v[0];
        }
        out
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::Domain(format!("index {index} outside grid of {}", self.len())));
        }
        Ok(())
    }
}

fn sample(f: &[f64], i: usize, offset: isize, boundary: Boundary) -> f64 {
    let n = f.len() as isize;
    let j = i as isize + offset;
    match boundary {
        Boundary::Periodic => f[j.rem_euclid(n) as usize],
        Boundary::OneSidedExtrapolation => f[j as usize],
    }
}

fn interior(n: usize, i: usize, boundary: Boundary) -> bool {
    boundary == Boundary::Periodic || (i >= 2 && i + 2 < n)
}

/// Mirrored view so that right-boundary stencils reuse the left-boundary ones.
fn one_sided(f: &[f64], i: usize) -> (Vec<f64>, usize, bool) {
    let n = f.len();
    if i < 2 {
        (f.to_vec(), i, false)
    } else {
        (f.iter().rev().copied().collect(), n - 1 - i, true)
    }
}

fn dot(coeffs: &[f64], f: &[f64]) -> f64 {
    coeffs.iter().zip(f).map(|(c, v)| c * v).sum()
}

/// (fourth-order, second-order) first derivative.
fn first_derivative(f: &[f64], i: usize, h: f64, boundary: Boundary) -> (f64, f64) {
    if interior(f.len(), i, boundary) {
        let s = |k| sample(f, i, k, boundary);
        let d4 = (s(-2) - 8.0 * s(-1) + 8.0 * s(1) - s(2)) / (12.0 * h);
        let d2 = (s(1) - s(-1)) / (2.0 * h);
        return (d4, d2);
    }
    let (g, k, flipped) = one_sided(f, i);
    let (d4, d2) = if k == 0 {
        (
            dot(&[-25.0, 48.0, -36.0, 16.0, -3.0], &g) / (12.0 * h),
            dot(&[-3.0, 4.0, -1.0], &g) / (2.0 * h),
        )
    } else {
        (
            dot(&[-3.0, -10.0, 18.0, -6.0, 1.0], &g) / (12.0 * h),
            (g[2] - g[0]) / (2.0 * h),
        )
    };
    if flipped {
        (-d4, -d2)
    } else {
        (d4, d2)
    }
}

/// (fourth-order, second-order) second derivative. One-sided stencils use six
/// points when available; with five points the boundary rule is third order.
fn second_derivative(f: &[f64], i: usize, h: f64, boundary: Boundary) -> (f64, f64) {
    let h2 = h * h;
    if interior(f.len(), i, boundary) {
        let s = |k| sample(f, i, k, boundary);
        let d4 = (-s(-2) + 16.0 * s(-1) - 30.0 * s(0) + 16.0 * s(1) - s(2)) / (12.0 * h2);
        let d2 = (s(1) - 2.0 * s(0) + s(-1)) / h2;
        return (d4, d2);
    }
    let (g, k, _) = one_sided(f, i);
    let six = g.len() >= 6;
    let d4 = match (k, six) {
        (0, true) => dot(&[45.0, -154.0, 214.0, -156.0, 61.0, -10.0], &g),
        (0, false) => dot(&[35.0, -104.0, 114.0, -56.0, 11.0], &g),
        (_, true) => dot(&[10.0, -15.0, -4.0, 14.0, -6.0, 1.0], &g),
        (_, false) => dot(&[11.0, -20.0, 6.0, 4.0, -1.0], &g),
    } / (12.0 * h2);
    let d2 = if k == 0 {
        dot(&[2.0, -5.0, 4.0, -1.0], &g) / h2
    } else {
        (g[0] - 2.0 * g[1] + g[2]) / h2
    };
    (d4, d2)
}

/// Derivatives of `xi0` at one phase-space point, restricted to the spatial
/// axis `x_1` and its conjugate momentum `p_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiJet {
    pub xi: f64,
    pub d_x: f64,
    pub d_xx: f64,
    pub d_p: f64,
    pub d_pp: f64,
    pub d_xp: f64,
}

impl XiJet {
    /// Builds the jet from a multiplier profile; momentum derivatives come
    /// from the band model (`d eps/dp_1 = v_1`, `d^2 eps/dp_1^2 = (grad_p v)_11`).
    pub fn from_profile(model: &DispersionModel, profile: &ProfileDerivatives, p: &[f64]) -> Result<Self> {
        let eps = model.energy(p)?;
        let v = model.group_velocity(p)?;
        let norm = p.iter().fold(0.0f64, |a, &c| a.hypot(c));
        let shell = model.shell(eps);
        let cos2 = if norm == 0.0 { 0.0 } else { (p[0] / norm).powi(2) };
        let h11 = shell.dspeed * cos2 + shell.v_over_p * (1.0 - cos2);
        let kt = model.thermal_energy();
        let beta = [profile.eta1[0] / kt, profile.eta1[1] / kt, profile.eta1[2] / kt];
        Ok(Self {
            xi: profile.eta0[0] + beta[0] * eps,
            d_x: profile.eta0[1] + beta[1] * eps,
            d_xx: profile.eta0[2] + beta[2] * eps,
            d_p: beta[0] * v[0],
            d_pp: beta[0] * h11,
            d_xp: beta[1] * v[0],
        })
    }
}

/// `e^xi (1 - e^xi) / (8 (e^xi + 1)^3)` and
/// `e^xi (e^{2 xi} - 4 e^xi + 1) / (24 (e^xi + 1)^4)`, written in terms of
/// the occupation to stay finite for any `xi`.
fn gradient_weights(xi: f64) -> (f64, f64) {
    let f = occupation(xi);
    let g = 1.0 - f;
    let a = f * g * (2.0 * f - 1.0) / 8.0;
    let b = f * g * (g * g - 4.0 * f * g + f * f) / 24.0;
    (a, b)
}

/// `Psi` at one phase-space point (carries `hbar^2`).
pub fn psi_pointwise(jet: &XiJet) -> f64 {
    let (a, b) = gradient_weights(jet.xi);
    let t1 = jet.d_xx * jet.d_pp - jet.d_xp * jet.d_xp;
    let t2 = jet.d_xx * jet.d_p * jet.d_p - 2.0 * jet.d_xp * jet.d_p * jet.d_x + jet.d_pp * jet.d_x * jet.d_x;
    HBAR * HBAR * (a * t1 + b * t2)
}

/// `w2 = -sigma'(xi0) xi2 + Psi` at one phase-space point, where `xi2` is the
/// full second-order exponent (including any `eta2_2 . v`).
pub fn w2_pointwise(jet: &XiJet, xi2: f64) -> f64 {
    let homogeneous = -occupation_slope(jet.xi) * xi2;
    if jet.d_x == 0.0 && jet.d_xx == 0.0 && jet.d_xp == 0.0 {
        return homogeneous;
    }
    homogeneous + psi_pointwise(jet)
}

/// Shell-integrated `D Psi = hbar^2 (c0 + c1 cos^2)` split into the
/// isotropic and `cos^2` parts.
fn psi_shell(profile: &ProfileDerivatives, kt: f64, x: f64, s: &Shell) -> (f64, f64, f64) {
    let eps = x * kt;
    let beta = profile.eta1[0] / kt;
    let beta1 = profile.eta1[1] / kt;
    let a1 = profile.eta0[1] + beta1 * eps;
    let a2 = profile.eta0[2] + profile.eta1[2] / kt * eps;
    let (a, b) = gradient_weights(profile.eta0[0] + profile.eta1[0] * x);
    let k0 = a * a2 * beta + b * beta * a1 * a1;
    let k1 = -a * beta1 * beta1 + b * (a2 * beta * beta - 2.0 * beta * beta1 * a1);
    let dos_dspeed = s.dos * s.dspeed;
    let dv2 = s.dos * s.speed * s.speed;
    (k0, k1, k0 * (dos_dspeed - s.dos_v_over_p) + k1 * dv2)
}

/// Moments of the gradient part of `w2` at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderRHS {
    pub psi_n: f64,
    pub psi_w: f64,
    pub psi_j: DVector<f64>,
    pub errors: MomentErrors,
    /// Set when the finite-difference error estimate exceeds the tolerance.
    pub accuracy_warning: Option<f64>,
}

impl SecondOrderRHS {
    pub fn zero(dim: usize) -> Self {
        Self {
            psi_n: 0.0,
            psi_w: 0.0,
            psi_j: DVector::zeros(dim),
            errors: MomentErrors::default(),
            accuracy_warning: None,
        }
    }
}

/// Multiplier change per cell above which derivatives are flagged.
pub const FINITE_DIFFERENCE_TOLERANCE: f64 = 1e-4;

/// `y int Psi (1, eps, v) dp` for given profile derivatives.
pub fn psi_from_profile(model: &DispersionModel, profile: &ProfileDerivatives, spec: &QuadratureSpec) -> Result<SecondOrderRHS> {
    if profile.is_homogeneous() {
        return Ok(SecondOrderRHS::zero(model.dim()));
    }
    if !(profile.eta1[0] > 0.0) {
        return Err(Error::Domain(format!("eta1 must be > 0, got {}", profile.eta1[0])));
    }
    let y = model.phase_space_prefactor();
    let kt = model.thermal_energy();
    let d = model.dim() as f64;
    let hbar2 = HBAR * HBAR;
    let (eta0, eta1) = (profile.eta0[0], profile.eta1[0]);
    let shell_mean = |x: f64, s: &Shell| {
        let (k0, _, c1) = psi_shell(profile, kt, x, s);
        k0 * s.dos_v_over_p + c1 / d
    };
    let n = band_integral(model, eta0, eta1, spec, shell_mean)? * (y * hbar2);
    let w = band_integral(model, eta0, eta1, spec, |x, s| x * shell_mean(x, s))? * (y * hbar2 * kt);
    Ok(SecondOrderRHS {
        psi_n: n.value,
        psi_w: w.value,
        psi_j: DVector::zeros(model.dim()),
        errors: MomentErrors {
            n: n.error,
            w: w.error,
            j: 0.0,
        },
        accuracy_warning: None,
    })
}

/// Moments of `Psi` at `index`, with spatial derivatives from the field.
pub fn psi_moments(
    model: &DispersionModel,
    field: &MultiplierField1D,
    index: usize,
    spec: &QuadratureSpec,
) -> Result<SecondOrderRHS> {
    let (profile, fd_error) = field.derivatives(index)?;
    let mut rhs = psi_from_profile(model, &profile, spec)?;
    if fd_error > FINITE_DIFFERENCE_TOLERANCE {
        rhs.accuracy_warning = Some(fd_error);
    }
    Ok(rhs)
}

/// `y int Psi grad_p v dp` (carries `hbar^2`).
///
/// Uses `<cos^2 p^ (x) p^> = (I + 2 e1 e1) / (d (d + 2))` over the unit sphere.
pub fn psi_velocity_gradient(model: &DispersionModel, profile: &ProfileDerivatives, spec: &QuadratureSpec) -> Result<DMatrix<f64>> {
    let dim = model.dim();
    if profile.is_homogeneous() {
        return Ok(DMatrix::zeros(dim, dim));
    }
    let y = model.phase_space_prefactor();
    let kt = model.thermal_energy();
    let d = dim as f64;
    let hbar2 = HBAR * HBAR;
    let (eta0, eta1) = (profile.eta0[0], profile.eta1[0]);
    // D Psi = (k0 Dv/p) + c1 cos^2; grad v = v' pp + (v/p)(I - pp).
    let iso = band_integral(model, eta0, eta1, spec, |x, s| {
        let (k0, _, c1) = psi_shell(profile, kt, x, s);
        let psi0 = k0 * s.dos_v_over_p;
        let transverse = psi0 * s.v_over_p * (1.0 - 1.0 / d) + c1 * s.v_over_p / d;
        let radial = psi0 * s.dspeed / d;
        let anisotropic = (c1 * (s.dspeed - s.v_over_p)) / (d * (d + 2.0));
        radial + transverse + anisotropic
    })?;
    let axial = band_integral(model, eta0, eta1, spec, |x, s| {
        let (_, _, c1) = psi_shell(profile, kt, x, s);
        2.0 * c1 * (s.dspeed - s.v_over_p) / (d * (d + 2.0))
    })?;
    let mut g = DMatrix::identity(dim, dim) * (iso.value * y * hbar2);
    g[(0, 0)] += axial.value * y * hbar2;
    Ok(g)
}

/// Matrix of the `(eta0_2, eta1_2)` system: `y int sigma' [1, x; x, x^2] D`,
/// the negated zeroth-order Jacobian.
pub fn second_order_matrix(model: &DispersionModel, mult0: &Multipliers, spec: &QuadratureSpec) -> Result<Matrix2<f64>> {
    Ok(-jacobian_2x2(model, mult0, spec)?)
}

/// Second-order moments of `w2` for given multipliers.
pub fn constraints_second_forward(
    model: &DispersionModel,
    mult0: &Multipliers,
    mult2: &Multipliers,
    rhs: &SecondOrderRHS,
    spec: &QuadratureSpec,
) -> Result<MomentVector> {
    mult0.check_zeroth(model)?;
    mult2.check_second(model)?;
    let kt = model.thermal_energy();
    let a = second_order_matrix(model, mult0, spec)?;
    let lin = a * Vector2::new(mult2.eta0, mult2.eta1);
    let j = if mult2.eta2.iter().all(|&c| c == 0.0) {
        rhs.psi_j.clone()
    } else {
        let kappa = drift_coefficient(model, mult0, spec)?;
        -&mult2.eta2 * kappa.value + &rhs.psi_j
    };
    Ok(MomentVector::new(
        -lin[0] + rhs.psi_n,
        (-lin[1]) * kt + rhs.psi_w,
        j,
        Order::Second,
    ))
}

/// Condition number above which the second-order system is rejected.
pub const MAX_CONDITION: f64 = 1e13;

/// Second-order multipliers from `target2` and the gradient moments `rhs`.
pub fn invert_second_order(
    model: &DispersionModel,
    mult0: &Multipliers,
    target2: &MomentVector,
    rhs: &SecondOrderRHS,
    spec: &QuadratureSpec,
) -> Result<Multipliers> {
    mult0.check_zeroth(model)?;
    if target2.order != Order::Second {
        return Err(Error::Precondition("second-order target required".into()));
    }
    if target2.j.len() != model.dim() || rhs.psi_j.len() != model.dim() {
        return Err(Error::Domain("second-order vectors must match the band dimension".into()));
    }
    let kt = model.thermal_energy();
    let a = second_order_matrix(model, mult0, spec)?;
    let eig = a.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::Conditioning(format!(
            "second-order matrix eigenvalues ({lo:e}, {hi:e})"
        )));
    }
    let b = Vector2::new(-target2.n + rhs.psi_n, (-target2.w + rhs.psi_w) / kt);
    let sol = a
        .cholesky()
        .ok_or_else(|| Error::Conditioning("second-order matrix is not positive definite".into()))?
        .solve(&b);
    let rhs_j = -&target2.j + &rhs.psi_j;
    let eta2 = if rhs_j.iter().all(|&c| c == 0.0) {
        DVector::zeros(model.dim())
    } else {
        let kappa = drift_coefficient(model, mult0, spec)?;
        if !(kappa.value > 0.0) {
            return Err(Error::Conditioning("velocity correlation tensor vanishes".into()));
        }
        rhs_j / kappa.value
    };
    Ok(Multipliers::second(sol[0] + 0.0, sol[1] + 0.0, eta2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ELECTRON_MASS;
    use crate::dispersion::alpha_from_per_ev;

    fn kane() -> DispersionModel {
        DispersionModel::kane(0.32 * ELECTRON_MASS, alpha_from_per_ev(0.5), 2.0, 300.0).unwrap()
    }

    fn grid(n: usize, h: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|i| f(i as f64 * h)).collect()
    }

    #[test]
    fn stencils_are_exact_on_quartics() {
        let h = 0.1;
        let f = |x: f64| 1.0 + 2.0 * x - x * x + 0.5 * x.powi(3) - 0.3 * x.powi(4);
        let df = |x: f64| 2.0 - 2.0 * x + 1.5 * x * x - 1.2 * x.powi(3);
        let ddf = |x: f64| -2.0 + 3.0 * x - 3.6 * x * x;
        let v = grid(8, h, f);
        for i in 0..8 {
            let x = i as f64 * h;
            let (d1, _) = first_derivative(&v, i, h, Boundary::OneSidedExtrapolation);
            let (d2, _) = second_derivative(&v, i, h, Boundary::OneSidedExtrapolation);
            assert!((d1 - df(x)).abs() < 1e-11, "d1 at {i}");
            assert!((d2 - ddf(x)).abs() < 1e-9, "d2 at {i}");
        }
    }

    #[test]
    fn homogeneous_reduction() {
        let jet = XiJet {
            xi: 0.0,
            d_x: 0.0,
            d_xx: 0.0,
            d_p: 3.0,
            d_pp: 1.0,
            d_xp: 0.0,
        };
        assert_eq!(w2_pointwise(&jet, 1.0), -0.25);
    }

    #[test]
    fn quadratic_weight_at_zero() {
        let (a, b) = gradient_weights(0.0);
        assert_eq!(a, 0.0);
        assert!((b + 1.0 / 192.0).abs() < 1e-17);
    }

    #[test]
    fn constant_field_has_no_gradient_moments() {
        let m = kane();
        let n = 7;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 1e-9).collect();
        let field = MultiplierField1D::new(
            x,
            vec![-2.0; n],
            vec![1.0; n],
            vec![DVector::zeros(3); n],
            Boundary::OneSidedExtrapolation,
        )
        .unwrap();
        let rhs = psi_moments(&m, &field, 3, &QuadratureSpec::default()).unwrap();
        assert_eq!(rhs.psi_n, 0.0);
        assert_eq!(rhs.psi_w, 0.0);
        assert!(rhs.accuracy_warning.is_none());
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let m = kane();
        let n = 6;
        let h = 2e-9;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let eta0 = x.iter().map(|&x| -2.0 + (x / 3e-9).sin()).collect();
        let field = MultiplierField1D::new(x, eta0, vec![1.0; n], vec![DVector::zeros(3); n], Boundary::OneSidedExtrapolation).unwrap();
        let rhs = psi_moments(&m, &field, 2, &QuadratureSpec::default()).unwrap();
        assert!(rhs.accuracy_warning.is_some());
    }

    #[test]
    fn zero_system_gives_zero_multipliers() {
        let m = kane();
        let mult0 = Multipliers::zeroth(-1.0, 1.0, DVector::zeros(3));
        let out = invert_second_order(
            &m,
            &mult0,
            &MomentVector::zero(3, Order::Second),
            &SecondOrderRHS::zero(3),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_eq!(out.eta0.to_bits(), 0);
        assert_eq!(out.eta1.to_bits(), 0);
        assert!(out.eta2.iter().all(|c| c.to_bits() == 0));
    }

    #[test]
    fn second_order_round_trip() {
        let m = kane();
        let spec = QuadratureSpec::default();
        let mult0 = Multipliers::zeroth(-3.0, 0.8, DVector::from_vec(vec![1e-7, 0.0, 0.0]));
        let truth = Multipliers::second(0.3, -0.2, DVector::from_vec(vec![2e-7, -1e-7, 5e-8]));
        let rhs = SecondOrderRHS::zero(3);
        let target = constraints_second_forward(&m, &mult0, &truth, &rhs, &spec).unwrap();
        let got = invert_second_order(&m, &mult0, &target, &rhs, &spec).unwrap();
        assert!((got.eta0 - truth.eta0).abs() < 1e-12);
        assert!((got.eta1 - truth.eta1).abs() < 1e-12);
        assert!((got.eta2 - &truth.eta2).norm() < 1e-12 * truth.eta2.norm());
    }

    #[test]
    fn csv_import() {
        let text = "# profile\nx,eta0,eta1,eta2_1,eta2_2\n0,1,1,0,0\n1e-9,1,1,0,0\n2e-9,1,1,0,0\n3e-9,1,1,0,0\n4e-9,1,1,0,0\n";
        let field = MultiplierField1D::from_csv(text, 2, Boundary::Periodic).unwrap();
        assert_eq!(field.len(), 5);
        assert!((field.spacing() - 1e-9).abs() < 1e-24);
        assert!(MultiplierField1D::from_csv("0,1,1,0\n", 2, Boundary::Periodic).is_err());
    }

    #[test]
    fn rejects_nonuniform_grid() {
        let x = vec![0.0, 1.0, 2.0, 3.5, 4.0];
        let r = MultiplierField1D::new(x, vec![0.0; 5], vec![1.0; 5], vec![DVector::zeros(2); 5], Boundary::Periodic);
        assert!(r.is_err());
    }

    #[test]
    fn gradient_moments_scale_quadratically() {
        // psi moments of a linear potential scale as the square of the slope.
        let m = kane();
        let spec = QuadratureSpec::default();
        let slope = 1e8;
        let p1 = ProfileDerivatives {
            eta0: [-1.0, slope, 0.0],
            eta1: [1.0, 0.0, 0.0],
        };
        let p2 = ProfileDerivatives {
            eta0: [-1.0, 2.0 * slope, 0.0],
            eta1: [1.0, 0.0, 0.0],
        };
        let r1 = psi_from_profile(&m, &p1, &spec).unwrap();
        let r2 = psi_from_profile(&m, &p2, &spec).unwrap();
        assert!((r2.psi_n / r1.psi_n - 4.0).abs() < 1e-9);
    }
}
