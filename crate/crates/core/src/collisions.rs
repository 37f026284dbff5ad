//! Electron-phonon production terms evaluated on the zeroth-order closure.
//!
//! Channel constants are stored in the normalization of the momentum-space
//! collision integrals used here, i.e. already divided by `hbar^d`; the
//! `from_*` constructors perform that conversion from material parameters.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::band::band_integral;
use crate::closure_zero::{drift_coefficient, Multipliers};
use crate::constants::HBAR;
use crate::dispersion::{BandKind, DispersionModel};
use crate::error::{Error, Result};
use crate::occupation::{occupation, occupation_slope, vacancy};
use crate::quadrature::{bose_occupation, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Inelastic intervalley optical scattering, constant overlap factor.
    SiliconOptical,
    /// Elastic limit of the optical operator at fixed `Lambda * N_B`.
    SiliconAcoustic,
    GrapheneAcoustic,
    GrapheneOptical,
    GrapheneK,
}

impl ChannelKind {
    pub fn is_inelastic(&self) -> bool {
        matches!(
            self,
            ChannelKind::SiliconOptical | ChannelKind::GrapheneOptical | ChannelKind::GrapheneK
        )
    }

    fn is_graphene(&self) -> bool {
        matches!(
            self,
            ChannelKind::GrapheneAcoustic | ChannelKind::GrapheneOptical | ChannelKind::GrapheneK
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhononChannel {
    pub kind: ChannelKind,
    pub coupling: f64,
    /// Phonon energy (J); zero for elastic channels.
    pub hbar_omega: f64,
    pub lattice_temperature: f64,
    /// Areal mass density (kg/m^2); graphene optical and K channels.
    pub areal_density: f64,
}

impl PhononChannel {
    pub fn new(
        kind: ChannelKind,
        coupling: f64,
        hbar_omega: f64,
        lattice_temperature: f64,
        areal_density: f64,
    ) -> Result<Self> {
        let ch = Self {
            kind,
            coupling,
            hbar_omega,
            lattice_temperature,
            areal_density,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn silicon_optical(coupling: f64, hbar_omega: f64, lattice_temperature: f64) -> Result<Self> {
        Self::new(ChannelKind::SiliconOptical, coupling, hbar_omega, lattice_temperature, 0.0)
    }

    /// `Lambda = Z pi (D_t K)^2 / (rho omega)`, with `D_t K` in J/m and
    /// `rho` in kg/m^3.
    pub fn silicon_optical_from_deformation(
        final_valleys: f64,
        coupling_field: f64,
        mass_density: f64,
        hbar_omega: f64,
        lattice_temperature: f64,
    ) -> Result<Self> {
        if !(hbar_omega > 0.0) {
            return Err(Error::Domain(format!("phonon energy must be > 0, got {hbar_omega:e}")));
        }
        let omega = hbar_omega / HBAR;
        let lambda = final_valleys * PI * coupling_field * coupling_field / (mass_density * omega);
        Self::silicon_optical(lambda / HBAR.powi(3), hbar_omega, lattice_temperature)
    }

    /// Elastic channel with effective constant `Lambda * N_B`.
    pub fn silicon_acoustic(coupling: f64, lattice_temperature: f64) -> Result<Self> {
        Self::new(ChannelKind::SiliconAcoustic, coupling, 0.0, lattice_temperature, 0.0)
    }

    /// Equipartition acoustic scattering: `Lambda N_B -> pi D^2 k_B T / (rho v_s^2 hbar)`
    /// per unit `hbar^3`, with `D` in J and `v_s` in m/s.
    pub fn silicon_acoustic_from_deformation(
        deformation_potential: f64,
        sound_speed: f64,
        mass_density: f64,
        lattice_temperature: f64,
    ) -> Result<Self> {
        let kt = crate::constants::K_B * lattice_temperature;
        let lambda = PI * deformation_potential.powi(2) * kt / (mass_density * sound_speed.powi(2) * HBAR);
        Self::silicon_acoustic(lambda / HBAR.powi(3), lattice_temperature)
    }

    pub fn graphene_acoustic(coupling: f64, lattice_temperature: f64) -> Result<Self> {
        Self::new(ChannelKind::GrapheneAcoustic, coupling, 0.0, lattice_temperature, 0.0)
    }

    /// `A = 2 pi D_ac^2 k_B T / (sigma hbar v_ac^2)` with `D_ac` in J.
    pub fn graphene_acoustic_from_deformation(
        deformation_potential: f64,
        sound_speed: f64,
        areal_density: f64,
        lattice_temperature: f64,
    ) -> Result<Self> {
        let kt = crate::constants::K_B * lattice_temperature;
        let a = 2.0 * PI * deformation_potential.powi(2) * kt / (areal_density * HBAR * sound_speed.powi(2));
        Self::graphene_acoustic(a / HBAR.powi(2), lattice_temperature)
    }

    /// Zone-centre optical phonons; `d2_gamma` in J^2/m^2.
    pub fn graphene_optical(d2_gamma: f64, hbar_omega: f64, areal_density: f64, lattice_temperature: f64) -> Result<Self> {
        Self::new(
            ChannelKind::GrapheneOptical,
            d2_gamma / HBAR.powi(2),
            hbar_omega,
            lattice_temperature,
            areal_density,
        )
    }

    /// Zone-edge K phonons; `d2_k` in J^2/m^2.
    pub fn graphene_k(d2_k: f64, hbar_omega: f64, areal_density: f64, lattice_temperature: f64) -> Result<Self> {
        Self::new(
            ChannelKind::GrapheneK,
            d2_k / HBAR.powi(2),
            hbar_omega,
            lattice_temperature,
            areal_density,
        )
    }

    /// Same channel with another coupling constant.
    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        Self::new(self.kind, coupling, self.hbar_omega, self.lattice_temperature, self.areal_density)
    }

    /// Same channel with another phonon energy (coupling unchanged).
    pub fn with_phonon_energy(&self, hbar_omega: f64) -> Result<Self> {
        Self::new(self.kind, self.coupling, hbar_omega, self.lattice_temperature, self.areal_density)
    }

    pub fn omega(&self) -> f64 {
        self.hbar_omega / HBAR
    }

    pub fn bose_occupation(&self) -> Result<f64> {
        bose_occupation(self.hbar_omega, self.lattice_temperature)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling > 0.0) || !self.coupling.is_finite() {
            return Err(Error::Domain(format!("coupling must be > 0, got {:e}", self.coupling)));
        }
        if !(self.lattice_temperature > 0.0) || !self.lattice_temperature.is_finite() {
            return Err(Error::Domain(format!(
                "lattice temperature must be > 0, got {}",
                self.lattice_temperature
            )));
        }
        if self.kind.is_inelastic() {
            if !(self.hbar_omega > 0.0) || !self.hbar_omega.is_finite() {
                return Err(Error::Domain(format!(
                    "{:?} needs a phonon energy > 0, got {:e}",
                    self.kind, self.hbar_omega
                )));
            }
        } else if self.hbar_omega != 0.0 {
            return Err(Error::Domain(format!("{:?} is elastic; phonon energy must be 0", self.kind)));
        }
        if matches!(self.kind, ChannelKind::GrapheneOptical | ChannelKind::GrapheneK)
            && (!(self.areal_density > 0.0) || !self.areal_density.is_finite())
        {
            return Err(Error::Domain(format!(
                "areal density must be > 0, got {:e}",
                self.areal_density
            )));
        }
        Ok(())
    }
}

/// Production terms. `c_j = momentum_coefficient * eta2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionVector {
    pub c_n: f64,
    /// Energy production (J / (m^d s)).
    pub c_w: f64,
    pub c_j: DVector<f64>,
    pub momentum_coefficient: f64,
    /// `c_w` divided by [`energy_rate_scale`]; independent of the phonon energy.
    pub reduced_c_w: f64,
    pub c_w_error: f64,
    pub momentum_coefficient_error: f64,
}

/// Pauli-blocked transition factor `f(xi(e_tilde)) (1 - f(xi(e)))` at reduced energies.
pub fn transition_occupancy(mult: &Multipliers, x_tilde: f64, x: f64) -> f64 {
    occupation(mult.xi(x_tilde)) * vacancy(mult.xi(x))
}

/// `exp(xi) / ((exp(xi_tilde) + 1) (exp(xi) + 1)^2)`.
pub fn kernel_f1(mult: &Multipliers, x_tilde: f64, x: f64) -> f64 {
    occupation(mult.xi(x_tilde)) * occupation_slope(mult.xi(x))
}

/// `exp(xi_tilde) / (exp(xi_tilde) + 1) * (1 / (exp(xi) + 1)^2 - exp(-xi_tilde))`.
pub fn kernel_f2(mult: &Multipliers, x_tilde: f64, x: f64) -> f64 {
    let f = occupation(mult.xi(x));
    vacancy(mult.xi(x_tilde)) * f * f - occupation(mult.xi(x_tilde))
}

/// Kane-band speed `sqrt(2 eps (1 + a eps) / (m (1 + 4 a eps (1 + a eps))))`.
fn kane_speed(m_star: f64, alpha: f64, eps: f64) -> f64 {
    let s = eps * (1.0 + alpha * eps);
    (2.0 * s / (m_star * (1.0 + 4.0 * alpha * s))).sqrt()
}

/// Scale that turns `c_w` into the reduced energy production.
pub fn energy_rate_scale(model: &DispersionModel, channel: &PhononChannel) -> f64 {
    let y = model.phase_space_prefactor();
    let kt = model.thermal_energy();
    match channel.kind {
        ChannelKind::SiliconOptical | ChannelKind::SiliconAcoustic => {
            4.0 * y * channel.coupling * model.m_star().powi(3) * kt.powi(3) / PI
        }
        ChannelKind::GrapheneOptical => {
            2.0 * y * channel.coupling * HBAR * kt.powi(3) / (channel.areal_density * model.v_fermi().powi(4))
        }
        ChannelKind::GrapheneK => {
            y * channel.coupling * HBAR * kt.powi(3) / (2.0 * channel.areal_density * model.v_fermi().powi(4))
        }
        ChannelKind::GrapheneAcoustic => 1.0,
    }
}

fn check_band(model: &DispersionModel, channel: &PhononChannel) -> Result<()> {
    channel.validate()?;
    let graphene = model.kind() == BandKind::Graphene;
    if graphene != channel.kind.is_graphene() {
        return Err(Error::Precondition(format!(
            "{:?} channel cannot act on a {:?} band",
            channel.kind,
            model.kind()
        )));
    }
    Ok(())
}

fn assemble(
    mult: &Multipliers,
    c_w: f64,
    c_w_error: f64,
    reduced_c_w: f64,
    coefficient: f64,
    coefficient_error: f64,
) -> ProductionVector {
    ProductionVector {
        c_n: 0.0,
        c_w,
        c_j: mult.eta2.map(|c| coefficient * c + 0.0),
        momentum_coefficient: coefficient,
        reduced_c_w,
        c_w_error,
        momentum_coefficient_error: coefficient_error,
    }
}

/// Silicon optical production with the Kane band.
pub fn silicon_optical_production(
    model: &DispersionModel,
    mult: &Multipliers,
    channel: &PhononChannel,
    spec: &QuadratureSpec,
) -> Result<ProductionVector> {
    mult.check_zeroth(model)?;
    check_band(model, channel)?;
    if channel.kind != ChannelKind::SiliconOptical {
        return Err(Error::Precondition(format!("expected a silicon optical channel, got {:?}", channel.kind)));
    }
    let kt = model.thermal_energy();
    let y = model.phase_space_prefactor();
    let (m, alpha) = (model.m_star(), model.alpha());
    let a = alpha * kt;
    let h = channel.hbar_omega / kt;
    let n_b = channel.bose_occupation()?;
    let n_b1 = n_b + 1.0;
    let (eta0, eta1) = (mult.eta0, mult.eta1);

    let weight = |x: f64, xp: f64| {
        (1.0 + 2.0 * a * x) * (1.0 + 2.0 * a * xp) * (x * xp * (1.0 + a * x) * (1.0 + a * xp)).sqrt()
    };
    // N_B e^h (emission weight) is N_B + 1; the bracket
    // f_i(x, x+h) - e^h f_i(x+h, x) equals f_i(x+h, x) e^h expm1((eta1 - 1) h).
    let cooling = ((eta1 - 1.0) * h).exp_m1();
    let w_int = band_integral(model, eta0, eta1, spec, |x, _| {
        transition_occupancy(mult, x + h, x) * weight(x, x + h)
    })?;
    let reduced = h * n_b1 * cooling * w_int.value / kt;
    let scale = energy_rate_scale(model, channel);
    let c_w = reduced * scale;
    let c_w_error = (h * n_b1 * cooling / kt * w_int.error * scale).abs();

    let v_int = band_integral(model, eta0, eta1, spec, |x, _| {
        let xp = x + h;
        let (e, ep) = (kane_speed(m, alpha, x * kt), kane_speed(m, alpha, xp * kt));
        let absorb = ep * kernel_f1(mult, x, xp) - e * kernel_f2(mult, x, xp);
        let emit = e * kernel_f1(mult, xp, x) - ep * kernel_f2(mult, xp, x);
        weight(x, xp) * (n_b * absorb + n_b1 * emit)
    })?;
    // weight carries kT (square root) and the band integral carries deps.
    let pref = y * channel.coupling * m.powi(3) / (3.0 * PI * PI) * kt;
    Ok(assemble(mult, c_w, c_w_error, reduced, pref * v_int.value, pref * v_int.error))
}

/// Elastic silicon production (`hbar omega -> 0` at fixed `Lambda N_B`).
pub fn silicon_acoustic_production(
    model: &DispersionModel,
    mult: &Multipliers,
    channel: &PhononChannel,
    spec: &QuadratureSpec,
) -> Result<ProductionVector> {
    mult.check_zeroth(model)?;
    check_band(model, channel)?;
    if channel.kind != ChannelKind::SiliconAcoustic {
        return Err(Error::Precondition(format!("expected a silicon acoustic channel, got {:?}", channel.kind)));
    }
    let kt = model.thermal_energy();
    let y = model.phase_space_prefactor();
    let (m, alpha) = (model.m_star(), model.alpha());
    let a = alpha * kt;
    let v_int = band_integral(model, mult.eta0, mult.eta1, spec, |x, _| {
        let g = 1.0 + 2.0 * a * x;
        g * g * x * (1.0 + a * x) * 2.0 * kane_speed(m, alpha, x * kt) * occupation(mult.xi(x))
    })?;
    let pref = y * channel.coupling * m.powi(3) / (3.0 * PI * PI) * kt;
    Ok(assemble(mult, 0.0, 0.0, 0.0, pref * v_int.value, pref * v_int.error))
}

/// Graphene acoustic production; elastic, so only momentum is exchanged.
pub fn graphene_acoustic_production(
    model: &DispersionModel,
    mult: &Multipliers,
    channel: &PhononChannel,
    spec: &QuadratureSpec,
) -> Result<ProductionVector> {
    mult.check_zeroth(model)?;
    check_band(model, channel)?;
    if channel.kind != ChannelKind::GrapheneAcoustic {
        return Err(Error::Precondition(format!("expected a graphene acoustic channel, got {:?}", channel.kind)));
    }
    let kt = model.thermal_energy();
    let y = model.phase_space_prefactor();
    let v = model.v_fermi();
    let c = model.half_gap();
    let v_int = band_integral(model, mult.eta0, mult.eta1, spec, |x, _| {
        let eps = x * kt;
        let pt = eps / v;
        let p = ((pt - c) * (pt + c)).max(0.0).sqrt();
        eps * p * occupation_slope(mult.xi(x))
    })?;
    let pref = -y * channel.coupling / (4.0 * PI * v * v);
    Ok(assemble(mult, 0.0, 0.0, 0.0, pref * v_int.value, (pref * v_int.error).abs()))
}

fn graphene_inelastic(
    model: &DispersionModel,
    mult: &Multipliers,
    channel: &PhononChannel,
    spec: &QuadratureSpec,
) -> Result<ProductionVector> {
    let kt = model.thermal_energy();
    let y = model.phase_space_prefactor();
    let v = model.v_fermi();
    let ec = v * model.half_gap() / kt;
    let h = channel.hbar_omega / kt;
    let n_b = channel.bose_occupation()?;
    let n_b1 = n_b + 1.0;
    let (eta0, eta1) = (mult.eta0, mult.eta1);

    let cooling = ((eta1 - 1.0) * h).exp_m1();
    let w_int = band_integral(model, eta0, eta1, spec, |x, _| {
        x * (x + h) * transition_occupancy(mult, x + h, x)
    })?;
    let reduced = n_b1 * cooling * w_int.value / kt;
    let scale = energy_rate_scale(model, channel);
    let c_w = reduced * scale;
    let c_w_error = (n_b1 * cooling / kt * w_int.error * scale).abs();

    // G(e_tilde, e) = (e_tilde / e)(e^2 - (v c)^2), in units of kT^2.
    let overlap = |xt: f64, x: f64| if ec == 0.0 { xt * x } else { xt * (x - ec * ec / x) };
    let v_int = band_integral(model, eta0, eta1, spec, |x, _| {
        let xp = x + h;
        let emit = kernel_f1(mult, xp, x) * overlap(xp, x) - kernel_f2(mult, xp, x) * overlap(x, xp);
        let absorb = kernel_f1(mult, x, xp) * overlap(x, xp) - kernel_f2(mult, x, xp) * overlap(xp, x);
        n_b1 * emit + n_b * absorb
    })?;
    let pref = y * channel.coupling / (4.0 * channel.areal_density * channel.omega() * PI * v * v) * kt * kt;
    Ok(assemble(mult, c_w, c_w_error, reduced, pref * v_int.value, (pref * v_int.error).abs()))
}

/// Graphene zone-centre optical production.
pub fn graphene_optical_production(
    model: &DispersionModel,
    mult: &Multipliers,
    channel: &PhononChannel,
    spec: &QuadratureSpec,
) -> Result<ProductionVector> {
    mult.check_zeroth(model)?;
    check_band(model, channel)?;
    if channel.kind != ChannelKind::GrapheneOptical {
        return Err(Error::Precondition(format!("expected a graphene optical channel, got {:?}", channel.kind)));
    }
    graphene_inelastic(model, mult, channel, spec)
}

/// Graphene K-phonon production; differs from the optical one only in the
/// energy prefactor.
pub fn graphene_k_production(
    model: &DispersionModel,
    mult: &Multipliers,
    channel: &PhononChannel,
    spec: &QuadratureSpec,
) -> Result<ProductionVector> {
    mult.check_zeroth(model)?;
    check_band(model, channel)?;
    if channel.kind != ChannelKind::GrapheneK {
        return Err(Error::Precondition(format!("expected a graphene K channel, got {:?}", channel.kind)));
    }
    graphene_inelastic(model, mult, channel, spec)
}

/// Dispatches on the channel kind.
pub fn production(
    model: &DispersionModel,
    mult: &Multipliers,
    channel: &PhononChannel,
    spec: &QuadratureSpec,
) -> Result<ProductionVector> {
    match channel.kind {
        ChannelKind::SiliconOptical => silicon_optical_production(model, mult, channel, spec),
        ChannelKind::SiliconAcoustic => silicon_acoustic_production(model, mult, channel, spec),
        ChannelKind::GrapheneAcoustic => graphene_acoustic_production(model, mult, channel, spec),
        ChannelKind::GrapheneOptical => graphene_optical_production(model, mult, channel, spec),
        ChannelKind::GrapheneK => graphene_k_production(model, mult, channel, spec),
    }
}

/// Sum of the productions of several channels.
pub fn total_production(
    model: &DispersionModel,
    mult: &Multipliers,
    channels: &[PhononChannel],
    spec: &QuadratureSpec,
) -> Result<ProductionVector> {
    let mut total = assemble(mult, 0.0, 0.0, 0.0, 0.0, 0.0);
    for ch in channels {
        let p = production(model, mult, ch, spec)?;
        total.c_w += p.c_w;
        total.c_w_error += p.c_w_error;
        total.reduced_c_w += p.reduced_c_w;
        total.momentum_coefficient += p.momentum_coefficient;
        total.momentum_coefficient_error += p.momentum_coefficient_error;
        total.c_j += p.c_j;
    }
    Ok(total)
}

/// Independent check of particle conservation for an inelastic channel:
/// the net rate into the lower level of each `(eps, eps + hbar omega)` pair,
/// integrated over the lower level, minus the same rate integrated over the
/// upper level, relative to the gross rate.
pub fn density_balance_residual(
    model: &DispersionModel,
    mult: &Multipliers,
    channel: &PhononChannel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_band(model, channel)?;
    if !channel.kind.is_inelastic() {
        return Ok(0.0);
    }
    let kt = model.thermal_energy();
    let h = channel.hbar_omega / kt;
    let n_b = channel.bose_occupation()?;
    let lower = model.band_minimum() / kt;
    let dos = |x: f64| model.shell(x * kt).dos;
    // Emission and absorption are integrated apart: their difference
    // vanishes pointwise at equilibrium and has no scale of its own.
    let emission = |x: f64| dos(x) * dos(x + h) * (n_b + 1.0) * transition_occupancy(mult, x + h, x);
    let absorption = |x: f64| dos(x) * dos(x + h) * n_b * transition_occupancy(mult, x, x + h);
    let window = crate::quadrature::FermiWindow::from_multipliers(mult.eta0 + mult.eta1 * h, mult.eta1);
    let over_band = |g: &dyn Fn(f64) -> f64| band_integral(model, mult.eta0, mult.eta1, spec, |x, _| g(x));
    let shifted = |g: &dyn Fn(f64) -> f64| {
        crate::quadrature::integrate_fermi_window(
            |x| g(x - h) * kt,
            lower + h,
            window,
            spec,
            crate::quadrature::Reference::AbsIntegral,
        )
    };
    let (e_gain, a_gain) = (over_band(&emission)?, over_band(&absorption)?);
    let (e_loss, a_loss) = (shifted(&emission)?, shifted(&absorption)?);
    let gain = e_gain.value - a_gain.value;
    let loss = e_loss.value - a_loss.value;
    Ok((gain - loss) / (e_gain.value + a_gain.value))
}

/// Relaxation time and whether the total momentum production opposes the drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationTime {
    pub tau: f64,
    pub opposes_drift: bool,
}

/// `tau = kappa_J / |kappa_C|` from `J = -kappa_J eta2` and `C_J = kappa_C eta2`.
pub fn relaxation_time(
    model: &DispersionModel,
    mult: &Multipliers,
    channels: &[PhononChannel],
    spec: &QuadratureSpec,
) -> Result<RelaxationTime> {
    if channels.is_empty() {
        return Err(Error::UndefinedRelaxationTime("no scattering channels".into()));
    }
    let total = total_production(model, mult, channels, spec)?;
    let kappa_j = drift_coefficient(model, mult, spec)?.value;
    relaxation_from_coefficients(kappa_j, total.momentum_coefficient)
}

/// `tau` from the drift coefficient and the summed momentum production coefficient.
pub fn relaxation_from_coefficients(kappa_j: f64, kappa_c: f64) -> Result<RelaxationTime> {
    if kappa_c == 0.0 || !kappa_c.is_finite() {
        return Err(Error::UndefinedRelaxationTime(format!(
            "total momentum production coefficient is {kappa_c:e}"
        )));
    }
    Ok(RelaxationTime {
        tau: kappa_j / kappa_c.abs(),
        opposes_drift: kappa_c > 0.0,
    })
}
