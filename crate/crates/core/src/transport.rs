//! Homogeneous bulk relaxation under a constant field, and mobilities.
//!
//! The field is `E = -grad(Phi)` and carriers have charge `q`, entering the
//! energy as `-q Phi`, so the drift force is `-q E`:
//!
//! ```text
//! dW/dt  = -q E.J0 + C_W
//! dJ0/dt = -q G0 E - J0 / tau
//! dJ2/dt = -q G2 E - J2 / tau
//! ```
//!
//! with `n0`, `n2` and `W2` held fixed.

use nalgebra::{DMatrix, DVector};
use thiserror::Error as ThisError;

use crate::band::band_integral;
use crate::closure_second::{invert_second_order, psi_velocity_gradient, ProfileDerivatives, SecondOrderRHS};
use crate::closure_zero::{
    closure_fluxes, constraints_forward, drift_coefficient, invert_constraints, InversionOptions, MomentVector,
    Multipliers, Order,
};
use crate::collisions::{relaxation_from_coefficients, total_production, PhononChannel};
use crate::constants::ELEMENTARY_CHARGE;
use crate::dispersion::{BandKind, DispersionModel};
use crate::error::{Error, Result};
use crate::occupation::occupation_slope;
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct BulkState {
    pub moments0: MomentVector,
    pub moments2: MomentVector,
    /// Electric field (V/m).
    pub field: DVector<f64>,
    pub time: f64,
}

impl BulkState {
    /// Zeroth-order state with vanishing second-order moments.
    pub fn semiclassical(moments0: MomentVector, field: DVector<f64>) -> Self {
        let dim = moments0.j.len();
        Self {
            moments0,
            moments2: MomentVector::zero(dim, Order::Second),
            field,
            time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityResult {
    pub mu0: DMatrix<f64>,
    pub mu2: DMatrix<f64>,
    pub n0: f64,
    pub n2: f64,
}

impl MobilityResult {
    /// `mu0 + hbar_scale^2 mu2`.
    pub fn total(&self, hbar_scale: f64) -> DMatrix<f64> {
        let s2 = hbar_scale * hbar_scale;
        self.mu0.zip_map(&self.mu2, |a, b| a + s2 * b + 0.0)
    }
}

/// `-q tau G E`.
pub fn steady_state_current(velocity_gradient: &DMatrix<f64>, tau: f64, field: &DVector<f64>) -> DVector<f64> {
    (velocity_gradient * field) * (-ELEMENTARY_CHARGE * tau)
}

pub fn mobility_zeroth(
    model: &DispersionModel,
    mult0: &Multipliers,
    tau: f64,
    spec: &QuadratureSpec,
) -> Result<MobilityResult> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("relaxation time must be >= 0, got {tau:e}")));
    }
    let dim = model.dim();
    let n0 = constraints_forward(model, mult0, spec)?.n;
    let g = closure_fluxes(model, mult0, spec)?.velocity_gradient;
    let mu0 = g.map(|c| -tau * ELEMENTARY_CHARGE / n0 * c + 0.0);
    Ok(MobilityResult {
        mu0,
        mu2: DMatrix::zeros(dim, dim),
        n0,
        n2: 0.0,
    })
}

/// `y int w2 grad_p v dp` with `w2 = -sigma' xi2 + Psi`; the `eta2` part is odd
/// and drops out. `gradient` supplies the profile for `Psi`; `None` is homogeneous.
pub fn second_order_velocity_gradient(
    model: &DispersionModel,
    mult0: &Multipliers,
    mult2: &Multipliers,
    gradient: Option<&ProfileDerivatives>,
    spec: &QuadratureSpec,
) -> Result<DMatrix<f64>> {
    mult0.check_zeroth(model)?;
    mult2.check_second(model)?;
    let dim = model.dim();
    let d = dim as f64;
    let y = model.phase_space_prefactor();
    let linear = if mult2.eta0 == 0.0 && mult2.eta1 == 0.0 {
        0.0
    } else {
        let g = band_integral(model, mult0.eta0, mult0.eta1, spec, |x, sh| {
            let xi2 = mult2.eta0 + mult2.eta1 * x;
            -occupation_slope(mult0.xi(x)) * xi2 * (sh.dspeed * sh.dos + (d - 1.0) * sh.dos_v_over_p)
        })?;
        g.value * y / d
    };
    let mut total = DMatrix::identity(dim, dim) * linear;
    if let Some(profile) = gradient {
        let base = ProfileDerivatives {
            eta0: [mult0.eta0, profile.eta0[1], profile.eta0[2]],
            eta1: [mult0.eta1, profile.eta1[1], profile.eta1[2]],
        };
        total += psi_velocity_gradient(model, &base, spec)?;
    }
    Ok(total)
}

/// `mu2 = -(n2/n0) mu0 - (tau q / n0) y int w2 grad_p v dp`.
#[allow(clippy::too_many_arguments)]
pub fn mobility_second(
    model: &DispersionModel,
    mult0: &Multipliers,
    mult2: &Multipliers,
    n0: f64,
    n2: f64,
    tau: f64,
    gradient: Option<&ProfileDerivatives>,
    spec: &QuadratureSpec,
) -> Result<MobilityResult> {
    if mult2.order != Order::Second {
        return Err(Error::Precondition("second-order multipliers required".into()));
    }
    if !(n0 > 0.0) || !n2.is_finite() {
        return Err(Error::Domain(format!("need n0 > 0 and finite n2, got {n0:e}, {n2:e}")));
    }
    let zeroth = mobility_zeroth(model, mult0, tau, spec)?;
    let g2 = second_order_velocity_gradient(model, mult0, mult2, gradient, spec)?;
    let ratio = n2 / n0;
    let scale = -tau * ELEMENTARY_CHARGE / n0;
    let mu2 = zeroth.mu0.zip_map(&g2, |m, g| -ratio * m + scale * g + 0.0);
    Ok(MobilityResult {
        mu0: zeroth.mu0,
        mu2,
        n0,
        n2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxOptions {
    pub inversion: InversionOptions,
    /// Relative local error per accepted step.
    pub rel_tol: f64,
    /// Stop once the relative rate of change falls below this.
    pub stationarity_tol: f64,
    pub max_steps: usize,
    /// Steps taken before stationarity is checked.
    pub min_steps: usize,
    /// Evolve the second-order current when non-zero.
    pub hbar_scale: f64,
    /// Profile for the gradient part of the second-order closure.
    pub gradient: Option<ProfileDerivatives>,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            inversion: InversionOptions::default(),
            rel_tol: 1e-8,
            stationarity_tol: 1e-8,
            max_steps: 20_000,
            min_steps: 0,
            hbar_scale: 0.0,
            gradient: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub n: f64,
    pub w: f64,
    pub j0: DVector<f64>,
    pub j2: DVector<f64>,
    pub multipliers: Multipliers,
    pub tau: f64,
    /// Relative rate of change used for the stopping test.
    pub stationarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub terminal: BulkState,
    /// Stationarity reached before `t_max` and `max_steps`.
    pub converged: bool,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory holds the initial point")
    }
}

#[derive(Debug, Clone, PartialEq, ThisError)]
#[error("trajectory aborted at t = {:e} s: {source}", .last.time)]
pub struct TrajectoryError {
    pub last: BulkState,
    #[source]
    pub source: Error,
}

struct Rates {
    derivative: DVector<f64>,
    multipliers: Multipliers,
    tau: f64,
    velocity_gradient: DMatrix<f64>,
}

struct BulkSystem<'a> {
    model: &'a DispersionModel,
    channels: &'a [PhononChannel],
    options: &'a RelaxOptions,
    n0: f64,
    n2: f64,
    w2: f64,
    field: DVector<f64>,
    dim: usize,
    second: bool,
}

impl BulkSystem<'_> {
    fn split(&self, state: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
        let d = self.dim;
        (
            state[0],
            state.rows(1, d).into_owned(),
            state.rows(1 + d, d).into_owned(),
        )
    }

    fn rates(&self, state: &DVector<f64>, guess: &Multipliers) -> Result<Rates> {
        let spec = &self.options.inversion.quadrature;
        let (w, j0, j2) = self.split(state);
        let target = MomentVector::new(self.n0, w, j0.clone(), Order::Zeroth);
        let mult0 = invert_constraints(self.model, &target, Some(guess), &self.options.inversion)?.multipliers;
        let production = total_production(self.model, &mult0, self.channels, spec)?;
        let kappa_j = drift_coefficient(self.model, &mult0, spec)?.value;
        let tau = relaxation_from_coefficients(kappa_j, production.momentum_coefficient)?.tau;
        let g0 = closure_fluxes(self.model, &mult0, spec)?.velocity_gradient;
        let q = ELEMENTARY_CHARGE;

        let mut derivative = DVector::zeros(1 + 2 * self.dim);
        derivative[0] = -q * self.field.dot(&j0) + production.c_w;
        let dj0 = -(&g0 * &self.field) * q - &j0 / tau;
        derivative.rows_mut(1, self.dim).copy_from(&dj0);
        if self.second {
            let target2 = MomentVector::new(self.n2, self.w2, j2.clone(), Order::Second);
            let rhs = SecondOrderRHS::zero(self.dim);
            let mult2 = invert_second_order(self.model, &mult0, &target2, &rhs, spec)?;
            let g2 = second_order_velocity_gradient(self.model, &mult0, &mult2, self.options.gradient.as_ref(), spec)?;
            let dj2 = -(&g2 * &self.field) * q - &j2 / tau;
            derivative.rows_mut(1 + self.dim, self.dim).copy_from(&dj2);
        }
        Ok(Rates {
            derivative,
            multipliers: mult0,
            tau,
            velocity_gradient: g0,
        })
    }

    fn speed_scale(&self) -> f64 {
        match self.model.kind() {
            BandKind::Graphene => self.model.v_fermi(),
            _ => (self.model.thermal_energy() / self.model.m_star()).sqrt(),
        }
    }

    fn error_weights(&self, state: &DVector<f64>) -> DVector<f64> {
        let flux = self.n0 * self.speed_scale();
        DVector::from_fn(state.len(), |i, _| {
            let floor = if i == 0 { state[0].abs() } else { flux };
            self.options.rel_tol * (floor + state[i].abs())
        })
    }

    fn snapshot(&self, time: f64, state: &DVector<f64>) -> BulkState {
        let (w, j0, j2) = self.split(state);
        BulkState {
            moments0: MomentVector::new(self.n0, w, j0, Order::Zeroth),
            moments2: MomentVector::new(self.n2, self.w2, j2, Order::Second),
            field: self.field.clone(),
            time,
        }
    }

    fn point(&self, time: f64, state: &DVector<f64>, rates: &Rates, stationarity: f64) -> TrajectoryPoint {
        let (w, j0, j2) = self.split(state);
        TrajectoryPoint {
            time,
            n: self.n0,
            w,
            j0,
            j2,
            multipliers: rates.multipliers.clone(),
            tau: rates.tau,
            stationarity,
        }
    }
}

// Dormand-Prince 5(4) tableau; the system is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates the homogeneous moment equations from `initial` until the
/// relative rate of change drops below `options.stationarity_tol` or
/// `t_max` is reached. `dt` is the first trial step.
pub fn relax_to_steady(
    model: &DispersionModel,
    channels: &[PhononChannel],
    initial: &BulkState,
    dt: f64,
    t_max: f64,
    options: &RelaxOptions,
) -> std::result::Result<Trajectory, TrajectoryError> {
    let abort = |state: &BulkState, source: Error| TrajectoryError {
        last: state.clone(),
        source,
    };
    let dim = model.dim();
    if !(dt > 0.0) || !(t_max > 0.0) || !dt.is_finite() || !t_max.is_finite() {
        return Err(abort(initial, Error::Domain(format!("need dt > 0 and t_max > 0, got {dt:e}, {t_max:e}"))));
    }
    if initial.field.len() != dim || initial.moments0.j.len() != dim || initial.moments2.j.len() != dim {
        return Err(abort(initial, Error::Domain("state vectors must match the band dimension".into())));
    }
    let system = BulkSystem {
        model,
        channels,
        options,
        n0: initial.moments0.n,
        n2: initial.moments2.n,
        w2: initial.moments2.w,
        field: initial.field.clone(),
        dim,
        second: options.hbar_scale != 0.0,
    };

    let mut state = DVector::zeros(1 + 2 * dim);
    state[0] = initial.moments0.w;
    state.rows_mut(1, dim).copy_from(&initial.moments0.j);
    if system.second {
        state.rows_mut(1 + dim, dim).copy_from(&initial.moments2.j);
    }
    let mut time = initial.time;
    let t_end = initial.time + t_max;

    let start = invert_constraints(model, &initial.moments0, None, &options.inversion)
        .map_err(|e| abort(initial, e))?
        .multipliers;
    let mut rates = system.rates(&state, &start).map_err(|e| abort(initial, e))?;
    let mut points = vec![system.point(time, &state, &rates, f64::INFINITY)];
    let mut h = dt.min(t_max);
    let mut rejected = 0;
    let mut previous: Option<(f64, f64)> = None;
    let mut converged = false;
    let mut steps = 0;

    while steps < options.max_steps && time < t_end {
        h = h.min(t_end - time);
        let attempt = dormand_prince_step(&system, &state, &rates, h);
        let (next, next_rates, err) = match attempt {
            Ok(v) => v,
            Err(_) => {
                rejected += 1;
                h *= 0.25;
                if h <= f64::EPSILON * time.abs().max(dt) {
                    let e = system.rates(&state, &rates.multipliers).err().unwrap_or_else(|| {
                        Error::Precondition("step size underflow after inversion failures".into())
                    });
                    return Err(abort(&system.snapshot(time, &state), e));
                }
                continue;
            }
        };
        let weights = system.error_weights(&state);
        let norm = err
            .iter()
            .zip(weights.iter())
            .map(|(e, w)| if *w > 0.0 { (e / w).powi(2) } else { 0.0 })
            .sum::<f64>()
            .sqrt()
            / (err.len() as f64).sqrt();
        if norm > 1.0 || !norm.is_finite() {
            rejected += 1;
            h *= (0.9 * norm.powf(-0.2)).clamp(0.1, 0.5);
            continue;
        }

        let dw_prev = rates.derivative[0];
        let w_prev = state[0];
        time += h;
        steps += 1;
        state = next;
        rates = next_rates;
        let growth = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h *= growth;

        // Local energy relaxation rate from successive derivatives.
        let dw = rates.derivative[0];
        let energy_rate = if state[0] != w_prev {
            ((dw - dw_prev) / (state[0] - w_prev)).abs()
        } else {
            previous.map_or(0.0, |p| p.1)
        };
        previous = Some((time, energy_rate));
        let stationarity = stationarity(&system, &state, &rates, energy_rate);
        points.push(system.point(time, &state, &rates, stationarity));
        if steps >= options.min_steps && stationarity < options.stationarity_tol {
            converged = true;
            break;
        }
    }

    Ok(Trajectory {
        points,
        terminal: system.snapshot(time, &state),
        converged,
        rejected_steps: rejected,
    })
}

/// Largest of `|dW/dt| / (lambda W)` and `tau |dJ/dt| / J_ref`, where `lambda`
/// is the local energy relaxation rate and `J_ref` the current scale.
fn stationarity(system: &BulkSystem, state: &DVector<f64>, rates: &Rates, energy_rate: f64) -> f64 {
    let dim = system.dim;
    let dw = rates.derivative[0].abs();
    let w_term = if dw == 0.0 {
        0.0
    } else if energy_rate > 0.0 {
        dw / (energy_rate * state[0].abs())
    } else {
        f64::INFINITY
    };
    let drive = steady_state_current(&rates.velocity_gradient, rates.tau, &system.field).norm();
    let floor = system.n0 * system.speed_scale() * system.options.stationarity_tol;
    let j0_ref = state.rows(1, dim).norm() + drive + floor;
    let j0_term = rates.derivative.rows(1, dim).norm() * rates.tau / j0_ref;
    let j2_term = if system.second {
        let j2_ref = state.rows(1 + dim, dim).norm() + floor * (system.n2.abs() / system.n0).max(f64::MIN_POSITIVE);
        rates.derivative.rows(1 + dim, dim).norm() * rates.tau / j2_ref
    } else {
        0.0
    };
    w_term.max(j0_term).max(j2_term)
}

type StepResult = (DVector<f64>, Rates, DVector<f64>);

fn dormand_prince_step(system: &BulkSystem, state: &DVector<f64>, first: &Rates, h: f64) -> Result<StepResult> {
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    k.push(first.derivative.clone());
    let mut guess = first.multipliers.clone();
    let mut last = None;
    for stage in 1..7 {
        let mut y = state.clone();
        for (j, kj) in k.iter().enumerate() {
            let a = A[stage][j];
            if a != 0.0 {
                y.axpy(h * a, kj, 1.0);
            }
        }
        let r = system.rates(&y, &guess)?;
        guess = r.multipliers.clone();
        k.push(r.derivative.clone());
        if stage == 6 {
            last = Some((y, r));
        }
    }
    let (next, rates) = last.expect("seven stages evaluated");
    let mut err = DVector::zeros(state.len());
    for (i, ki) in k.iter().enumerate() {
        let b = B5[i] - B4[i];
        if b != 0.0 {
            err.axpy(h * b, ki, 1.0);
        }
    }
    Ok((next, rates, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ELECTRON_MASS, EV};

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn parabolic_mobility_is_tau_q_over_m() {
        let m = DispersionModel::parabolic(0.26 * ELECTRON_MASS, 2.0, 300.0).unwrap();
        let tau = 1e-13;
        for &(e0, e1) in &[(-10.0, 1.0), (2.0, 0.4), (-1.0, 3.0)] {
            let mult = Multipliers::zeroth(e0, e1, DVector::zeros(3));
            let mu = mobility_zeroth(&m, &mult, tau, &spec()).unwrap();
            let expect = -tau * ELEMENTARY_CHARGE / m.m_star();
            for i in 0..3 {
                assert!((mu.mu0[(i, i)] / expect - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_tau_gives_zero_tensor() {
        let m = DispersionModel::graphene(1e6, 0.0, 4.0, 300.0).unwrap();
        let mult = Multipliers::equilibrium(-1.0, 2);
        let mu = mobility_zeroth(&m, &mult, 0.0, &spec()).unwrap();
        assert!(mu.mu0.iter().all(|c| *c == 0.0 && c.is_sign_positive()));
    }

    #[test]
    fn vanishing_second_order_gives_zero() {
        let m = DispersionModel::graphene(1e6, 0.0, 4.0, 300.0).unwrap();
        let mult0 = Multipliers::equilibrium(-1.0, 2);
        let mult2 = Multipliers::second(0.0, 0.0, DVector::zeros(2));
        let mu = mobility_second(&m, &mult0, &mult2, 1e16, 0.0, 1e-13, None, &spec()).unwrap();
        assert!(mu.mu2.iter().all(|c| *c == 0.0));
        assert_eq!(mu.total(0.0), mu.mu0);
        assert!(mobility_second(&m, &mult0, &mult0, 1e16, 0.0, 1e-13, None, &spec()).is_err());
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let m = DispersionModel::graphene(1e6, 0.0, 4.0, 300.0).unwrap();
        let ch = [
            PhononChannel::graphene_acoustic_from_deformation(6.8 * EV, 2e4, 7.6e-7, 300.0).unwrap(),
            PhononChannel::graphene_optical(25.6 * (1e10 * EV).powi(2), 0.164 * EV, 7.6e-7, 300.0).unwrap(),
        ];
        let mult = Multipliers::equilibrium(-2.0, 2);
        let moments = constraints_forward(&m, &mult, &spec()).unwrap();
        let start = BulkState::semiclassical(moments.clone(), DVector::zeros(2));
        let opts = RelaxOptions {
            min_steps: 50,
            ..RelaxOptions::default()
        };
        let tr = relax_to_steady(&m, &ch, &start, 1e-14, 1e-9, &opts).unwrap();
        for p in &tr.points {
            assert!((p.w / moments.w - 1.0).abs() < 1e-10);
            assert!(p.j0.iter().all(|c| *c == 0.0));
        }
    }
}
