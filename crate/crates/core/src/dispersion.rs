//! Isotropic band models: Kane (non-parabolic), parabolic and gapped graphene.
//!
//! Momentum integrals of isotropic or direction-linear integrands are reduced
//! to energy integrals through the shell measure `dos_weight`, i.e.
//! `int g(eps(p)) dp = int g(eps) D(eps) deps`.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::constants::{EV, HBAR, K_B};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandKind {
    Kane,
    Parabolic,
    Graphene,
}

/// An isotropic energy band plus the lattice temperature that sets the
/// thermal energy scale used for nondimensionalization.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionModel {
    kind: BandKind,
    m_star: f64,
    alpha: f64,
    v_fermi: f64,
    half_gap: f64,
    degeneracy: f64,
    lattice_temperature: f64,
}

/// Shell quantities at fixed energy, all in SI units.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shell {
    /// `D(eps)`, the angular-integrated shell measure.
    pub dos: f64,
    /// `|v|`.
    pub speed: f64,
    /// `d|v|/d|p|`, the radial eigenvalue of `grad_p v`.
    pub dspeed: f64,
    /// `D(eps) * |v| / |p|`; `|v|/|p|` is the transverse eigenvalue of
    /// `grad_p v`. Finite at the band edge.
    pub dos_v_over_p: f64,
    /// `|v| / |p|`.
    pub v_over_p: f64,
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {value:e}")))
    }
}

impl DispersionModel {
    /// Kane band `eps (1 + alpha eps) = p^2 / 2 m*` with `alpha` in 1/J.
    pub fn kane(m_star: f64, alpha: f64, degeneracy: f64, lattice_temperature: f64) -> Result<Self> {
        check_positive("effective mass", m_star)?;
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("non-parabolicity must be >= 0, got {alpha:e}")));
        }
        check_positive("degeneracy", degeneracy)?;
        check_positive("lattice temperature", lattice_temperature)?;
        Ok(Self {
            kind: BandKind::Kane,
            m_star,
            alpha,
            v_fermi: 0.0,
            half_gap: 0.0,
            degeneracy,
            lattice_temperature,
        })
    }

    /// Parabolic band; evaluates through the Kane formulas with `alpha = 0`.
    pub fn parabolic(m_star: f64, degeneracy: f64, lattice_temperature: f64) -> Result<Self> {
        let mut model = Self::kane(m_star, 0.0, degeneracy, lattice_temperature)?;
        model.kind = BandKind::Parabolic;
        Ok(model)
    }

    /// Graphene cone `eps = v_F sqrt(|p|^2 + c^2)` with half gap `c` in kg m/s.
    pub fn graphene(
        v_fermi: f64,
        half_gap: f64,
        degeneracy: f64,
        lattice_temperature: f64,
    ) -> Result<Self> {
        check_positive("Fermi speed", v_fermi)?;
        if !(half_gap >= 0.0) || !half_gap.is_finite() {
            return Err(Error::Domain(format!("half gap must be >= 0, got {half_gap:e}")));
        }
        check_positive("degeneracy", degeneracy)?;
        check_positive("lattice temperature", lattice_temperature)?;
        Ok(Self {
            kind: BandKind::Graphene,
            m_star: 0.0,
            alpha: 0.0,
            v_fermi,
            half_gap,
            degeneracy,
            lattice_temperature,
        })
    }

    /// Same band at a different lattice temperature.
    pub fn at_temperature(&self, lattice_temperature: f64) -> Result<Self> {
        check_positive("lattice temperature", lattice_temperature)?;
        Ok(Self {
            lattice_temperature,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> BandKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            BandKind::Kane | BandKind::Parabolic => 3,
            BandKind::Graphene => 2,
        }
    }

    pub fn m_star(&self) -> f64 {
        self.m_star
    }

    /// Non-parabolicity in 1/J.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn v_fermi(&self) -> f64 {
        self.v_fermi
    }

    pub fn half_gap(&self) -> f64 {
        self.half_gap
    }

    /// `g_s * g_v`.
    pub fn degeneracy(&self) -> f64 {
        self.degeneracy
    }

    pub fn lattice_temperature(&self) -> f64 {
        self.lattice_temperature
    }

    /// `k_B T_L` in joules.
    pub fn thermal_energy(&self) -> f64 {
        K_B * self.lattice_temperature
    }

    /// `y = g_s g_v / (2 pi hbar)^d`.
    pub fn phase_space_prefactor(&self) -> f64 {
        self.degeneracy / (2.0 * PI * HBAR).powi(self.dim() as i32)
    }

    /// Lowest band energy in joules.
    pub fn band_minimum(&self) -> f64 {
        match self.kind {
            BandKind::Kane | BandKind::Parabolic => 0.0,
            BandKind::Graphene => self.v_fermi * self.half_gap,
        }
    }

    /// Energy at momentum magnitude `p`.
    pub fn energy_of_momentum(&self, p: f64) -> f64 {
        match self.kind {
            BandKind::Kane | BandKind::Parabolic => {
                let kinetic = p * p / (2.0 * self.m_star);
                // Stable root of eps (1 + alpha eps) = kinetic.
                2.0 * kinetic / (1.0 + (1.0 + 4.0 * self.alpha * kinetic).sqrt())
            }
            BandKind::Graphene => self.v_fermi * p.hypot(self.half_gap),
        }
    }

    /// Momentum magnitude at energy `eps`.
    pub fn momentum_of_energy(&self, eps: f64) -> Result<f64> {
        self.check_energy(eps)?;
        Ok(match self.kind {
            BandKind::Kane | BandKind::Parabolic => {
                (2.0 * self.m_star * eps * (1.0 + self.alpha * eps)).sqrt()
            }
            BandKind::Graphene => {
                let pt = eps / self.v_fermi;
                ((pt - self.half_gap) * (pt + self.half_gap)).max(0.0).sqrt()
            }
        })
    }

    /// Speed `|v|` at momentum magnitude `p`.
    pub fn speed_of_momentum(&self, p: f64) -> f64 {
        match self.kind {
            BandKind::Kane | BandKind::Parabolic => {
                let eps = self.energy_of_momentum(p);
                p / (self.m_star * (1.0 + 2.0 * self.alpha * eps))
            }
            BandKind::Graphene => {
                let pt = p.hypot(self.half_gap);
                if pt == 0.0 {
                    0.0
                } else {
                    self.v_fermi * p / pt
                }
            }
        }
    }

    pub fn energy(&self, p: &[f64]) -> Result<f64> {
        Ok(self.energy_of_momentum(self.momentum_norm(p)?))
    }

    pub fn group_velocity(&self, p: &[f64]) -> Result<DVector<f64>> {
        let norm = self.momentum_norm(p)?;
        let scale = match self.kind {
            BandKind::Kane | BandKind::Parabolic => {
                1.0 / (self.m_star * (1.0 + 2.0 * self.alpha * self.energy_of_momentum(norm)))
            }
            BandKind::Graphene => {
                let pt = norm.hypot(self.half_gap);
                if pt == 0.0 {
                    0.0
                } else {
                    self.v_fermi / pt
                }
            }
        };
        Ok(DVector::from_iterator(p.len(), p.iter().map(|&c| c * scale)))
    }

    /// Supremum of `|v|`; [`Error::UnboundedSpeed`] for a parabolic band.
    pub fn speed_bound(&self) -> Result<f64> {
        match self.kind {
            BandKind::Graphene => Ok(self.v_fermi),
            BandKind::Kane | BandKind::Parabolic if self.alpha > 0.0 => {
                Ok(1.0 / (2.0 * self.m_star * self.alpha).sqrt())
            }
            _ => Err(Error::UnboundedSpeed),
        }
    }

    /// Shell measure `D(eps)` with `int g(eps(p)) dp = int g D deps`.
    ///
    /// Kane: `4 pi m*^(3/2) (1 + 2 alpha eps) sqrt(2 eps (1 + alpha eps))`.
    /// Graphene: `|p| d|p| = eps deps / v_F^2` gives `2 pi eps / v_F^2`.
    pub fn dos_weight(&self, eps: f64) -> Result<f64> {
        self.check_energy(eps)?;
        Ok(self.shell(eps).dos)
    }

    pub(crate) fn shell(&self, eps: f64) -> Shell {
        match self.kind {
            BandKind::Kane | BandKind::Parabolic => {
                let m = self.m_star;
                let g = 1.0 + 2.0 * self.alpha * eps;
                let s = (2.0 * eps * (1.0 + self.alpha * eps)).max(0.0);
                let root_s = s.sqrt();
                let dos_v_over_p = 4.0 * PI * m.sqrt() * root_s;
                Shell {
                    dos: dos_v_over_p * m * g,
                    speed: root_s / (m.sqrt() * g),
                    dspeed: 1.0 / (m * g * g * g),
                    dos_v_over_p,
                    v_over_p: 1.0 / (m * g),
                }
            }
            BandKind::Graphene => {
                let v = self.v_fermi;
                let ec = v * self.half_gap;
                let ratio = if ec == 0.0 { 0.0 } else { ec / eps };
                Shell {
                    dos: 2.0 * PI * eps / (v * v),
                    speed: v * ((1.0 - ratio) * (1.0 + ratio)).max(0.0).sqrt(),
                    dspeed: v * v * ratio * ratio / eps,
                    dos_v_over_p: 2.0 * PI,
                    v_over_p: v * v / eps,
                }
            }
        }
    }

    fn momentum_norm(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim() {
            return Err(Error::Domain(format!(
                "momentum has {} components, band is {}-dimensional",
                p.len(),
                self.dim()
            )));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("momentum must be finite".into()));
        }
        Ok(p.iter().fold(0.0f64, |acc, &c| acc.hypot(c)))
    }

    fn check_energy(&self, eps: f64) -> Result<()> {
        if !eps.is_finite() || eps < self.band_minimum() {
            return Err(Error::Domain(format!(
                "energy {eps:e} J is outside the band (minimum {:e} J)",
                self.band_minimum()
            )));
        }
        Ok(())
    }
}

/// Non-parabolicity given in 1/eV converted to 1/J.
pub fn alpha_from_per_ev(alpha_per_ev: f64) -> f64 {
    alpha_per_ev / EV
}
