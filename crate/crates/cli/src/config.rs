//! Run configuration: TOML layout, material presets and validation.
//!
//! Physical inputs are in eV, K and SI; conversion happens in [`Scenario`].

use std::path::{Path, PathBuf};

use qmep_core::closure_second::{Boundary, MultiplierField1D};
use qmep_core::collisions::{ChannelKind, PhononChannel};
use qmep_core::constants::{ELECTRON_MASS, EV};
use qmep_core::dispersion::alpha_from_per_ev;
use qmep_core::{DispersionModel, QuadratureSpec};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialConfig,
    #[serde(default)]
    pub channels: Vec<ChannelConfig>,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub second_order: SecondOrderConfig,
    #[serde(default)]
    pub relax: RelaxConfig,
    #[serde(default)]
    pub hbar_scale: f64,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub preset: Option<String>,
    /// Effective mass in electron masses.
    pub m_star: Option<f64>,
    /// Non-parabolicity (1/eV).
    pub alpha: Option<f64>,
    pub v_fermi: Option<f64>,
    /// `v_F c` (eV).
    pub gap_energy: Option<f64>,
    pub degeneracy: Option<f64>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelName {
    SiliconOptical,
    SiliconAcoustic,
    GrapheneAcoustic,
    GrapheneOptical,
    GrapheneK,
}

impl ChannelName {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelName::SiliconOptical => "silicon-optical",
            ChannelName::SiliconAcoustic => "silicon-acoustic",
            ChannelName::GrapheneAcoustic => "graphene-acoustic",
            ChannelName::GrapheneOptical => "graphene-optical",
            ChannelName::GrapheneK => "graphene-k",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub kind: ChannelName,
    /// Normalized channel constant, used as is when given.
    pub coupling: Option<f64>,
    /// `D_t K` (eV/m).
    pub coupling_field: Option<f64>,
    pub final_valleys: Option<f64>,
    /// Volume mass density (kg/m^3).
    pub mass_density: Option<f64>,
    /// Areal mass density (kg/m^2).
    pub areal_density: Option<f64>,
    /// eV.
    pub phonon_energy: Option<f64>,
    /// eV.
    pub deformation_potential: Option<f64>,
    pub sound_speed: Option<f64>,
    /// `D^2` (eV^2/m^2).
    pub d2: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub eta0: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<Vec<f64>>,
    /// Carrier density (1/m^d).
    pub density: Option<f64>,
    /// Mean energy per carrier (eV).
    pub mean_energy: Option<f64>,
    /// Electric field (V/m).
    pub field: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Eta0,
    Eta1,
    Density,
    MeanEnergy,
    Temperature,
    CouplingScale,
    PhononEnergy,
    Field,
}

impl SweepParameter {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParameter::Eta0 => "eta0",
            SweepParameter::Eta1 => "eta1",
            SweepParameter::Density => "density",
            SweepParameter::MeanEnergy => "mean_energy",
            SweepParameter::Temperature => "temperature",
            SweepParameter::CouplingScale => "coupling_scale",
            SweepParameter::PhononEnergy => "phonon_energy",
            SweepParameter::Field => "field",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub min: f64,
    pub max: f64,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

fn one() -> usize {
    1
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        if n == 1 {
            return vec![self.min];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_subdivisions: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondOrderConfig {
    /// `n2 / n0`.
    #[serde(default)]
    pub density_ratio: f64,
    /// `W2 / W0`.
    #[serde(default)]
    pub energy_ratio: f64,
    /// Multiplier profile CSV (`x, eta0, eta1, eta2...`), relative to the config file.
    pub profile: Option<PathBuf>,
    #[serde(default)]
    pub profile_index: usize,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Start from this `eta1` at the configured `eta0` instead of the state.
    pub hot_eta1: Option<f64>,
    #[serde(default)]
    pub min_steps: usize,
    pub stationarity_tol: Option<f64>,
    pub max_steps: Option<usize>,
}

fn default_dt() -> f64 {
    1e-15
}

fn default_t_max() -> f64 {
    1e-7
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_max: default_t_max(),
            hot_eta1: None,
            min_steps: 0,
            stationarity_tol: None,
            max_steps: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }
}

/// Fully specified material parameters after preset expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    Kane {
        m_star: f64,
        alpha_per_ev: f64,
        degeneracy: f64,
        temperature: f64,
    },
    Graphene {
        v_fermi: f64,
        gap_energy: f64,
        degeneracy: f64,
        temperature: f64,
    },
}

impl Material {
    pub fn from_config(cfg: &MaterialConfig) -> Result<Self, ConfigError> {
        let preset = cfg.preset.as_deref();
        let base = match preset {
            Some("silicon-kane") => Material::Kane {
                m_star: 0.32,
                alpha_per_ev: 0.5,
                degeneracy: 12.0,
                temperature: 300.0,
            },
            Some("silicon-parabolic") => Material::Kane {
                m_star: 0.32,
                alpha_per_ev: 0.0,
                degeneracy: 12.0,
                temperature: 300.0,
            },
            Some("graphene") => Material::Graphene {
                v_fermi: 1e6,
                gap_energy: 0.0,
                degeneracy: 4.0,
                temperature: 300.0,
            },
            Some("graphene-gapped") => Material::Graphene {
                v_fermi: 1e6,
                gap_energy: 0.05,
                degeneracy: 4.0,
                temperature: 300.0,
            },
            Some(other) => return Err(invalid(format!("unknown material preset {other:?}"))),
            None if cfg.v_fermi.is_some() => Material::Graphene {
                v_fermi: f64::NAN,
                gap_energy: 0.0,
                degeneracy: 4.0,
                temperature: f64::NAN,
            },
            None => Material::Kane {
                m_star: f64::NAN,
                alpha_per_ev: 0.0,
                degeneracy: 2.0,
                temperature: f64::NAN,
            },
        };
        let material = match base {
            Material::Kane {
                m_star,
                alpha_per_ev,
                degeneracy,
                temperature,
            } => {
                if cfg.v_fermi.is_some() || cfg.gap_energy.is_some() {
                    return Err(invalid("v_fermi and gap_energy apply to graphene only"));
                }
                Material::Kane {
                    m_star: cfg.m_star.unwrap_or(m_star),
                    alpha_per_ev: cfg.alpha.unwrap_or(alpha_per_ev),
                    degeneracy: cfg.degeneracy.unwrap_or(degeneracy),
                    temperature: cfg.temperature.unwrap_or(temperature),
                }
            }
            Material::Graphene {
                v_fermi,
                gap_energy,
                degeneracy,
                temperature,
            } => {
                if cfg.m_star.is_some() || cfg.alpha.is_some() {
                    return Err(invalid("m_star and alpha apply to silicon only"));
                }
                Material::Graphene {
                    v_fermi: cfg.v_fermi.unwrap_or(v_fermi),
                    gap_energy: cfg.gap_energy.unwrap_or(gap_energy),
                    degeneracy: cfg.degeneracy.unwrap_or(degeneracy),
                    temperature: cfg.temperature.unwrap_or(temperature),
                }
            }
        };
        material.model()?;
        Ok(material)
    }

    pub fn temperature(&self) -> f64 {
        match *self {
            Material::Kane { temperature, .. } | Material::Graphene { temperature, .. } => temperature,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        match &mut self {
            Material::Kane { temperature, .. } | Material::Graphene { temperature, .. } => *temperature = t,
        }
        self
    }

    pub fn is_graphene(&self) -> bool {
        matches!(self, Material::Graphene { .. })
    }

    pub fn model(&self) -> Result<DispersionModel, ConfigError> {
        let m = match *self {
            Material::Kane {
                m_star,
                alpha_per_ev,
                degeneracy,
                temperature,
            } => {
                if alpha_per_ev == 0.0 {
                    DispersionModel::parabolic(m_star * ELECTRON_MASS, degeneracy, temperature)
                } else {
                    DispersionModel::kane(m_star * ELECTRON_MASS, alpha_from_per_ev(alpha_per_ev), degeneracy, temperature)
                }
            }
            Material::Graphene {
                v_fermi,
                gap_energy,
                degeneracy,
                temperature,
            } => DispersionModel::graphene(v_fermi, gap_energy * EV / v_fermi, degeneracy, temperature),
        };
        m.map_err(|e| invalid(format!("material: {e}")))
    }
}

impl ChannelConfig {
    fn require(&self, value: Option<f64>, name: &str) -> Result<f64, ConfigError> {
        value.ok_or_else(|| invalid(format!("{} channel needs `{name}`", self.kind.label())))
    }

    /// Builds the channel at the given temperature, with the phonon energy
    /// optionally overridden (eV) and the coupling multiplied by `scale`.
    pub fn build(&self, temperature: f64, phonon_energy: Option<f64>, scale: f64) -> Result<PhononChannel, ConfigError> {
        let hw = phonon_energy.or(self.phonon_energy);
        let channel = match self.kind {
            ChannelName::SiliconOptical => {
                let hw = self.require(hw, "phonon_energy")? * EV;
                match self.coupling {
                    Some(c) => PhononChannel::silicon_optical(c, hw, temperature),
                    None => PhononChannel::silicon_optical_from_deformation(
                        self.final_valleys.unwrap_or(1.0),
                        self.require(self.coupling_field, "coupling_field")? * EV,
                        self.require(self.mass_density, "mass_density")?,
                        hw,
                        temperature,
                    ),
                }
            }
            ChannelName::SiliconAcoustic => match self.coupling {
                Some(c) => PhononChannel::silicon_acoustic(c, temperature),
                None => PhononChannel::silicon_acoustic_from_deformation(
                    self.require(self.deformation_potential, "deformation_potential")? * EV,
                    self.require(self.sound_speed, "sound_speed")?,
                    self.require(self.mass_density, "mass_density")?,
                    temperature,
                ),
            },
            ChannelName::GrapheneAcoustic => match self.coupling {
                Some(c) => PhononChannel::graphene_acoustic(c, temperature),
                None => PhononChannel::graphene_acoustic_from_deformation(
                    self.require(self.deformation_potential, "deformation_potential")? * EV,
                    self.require(self.sound_speed, "sound_speed")?,
                    self.require(self.areal_density, "areal_density")?,
                    temperature,
                ),
            },
            ChannelName::GrapheneOptical | ChannelName::GrapheneK => {
                let hw = self.require(hw, "phonon_energy")? * EV;
                let sigma = self.require(self.areal_density, "areal_density")?;
                let kind = if self.kind == ChannelName::GrapheneOptical {
                    ChannelKind::GrapheneOptical
                } else {
                    ChannelKind::GrapheneK
                };
                match (self.coupling, self.d2) {
                    (Some(c), _) => PhononChannel::new(kind, c, hw, temperature, sigma),
                    (None, Some(d2)) if kind == ChannelKind::GrapheneOptical => {
                        PhononChannel::graphene_optical(d2 * EV * EV, hw, sigma, temperature)
                    }
                    (None, Some(d2)) => PhononChannel::graphene_k(d2 * EV * EV, hw, sigma, temperature),
                    (None, None) => return Err(invalid(format!("{} channel needs `d2` or `coupling`", self.kind.label()))),
                }
            }
        };
        let channel = channel.map_err(|e| invalid(format!("{} channel: {e}", self.kind.label())))?;
        channel
            .with_coupling(channel.coupling * scale)
            .map_err(|e| invalid(format!("{} channel: {e}", self.kind.label())))
    }
}

/// Validated configuration with presets expanded and files loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub material: Material,
    pub channels: Vec<ChannelConfig>,
    pub state: StateConfig,
    pub axes: Vec<SweepAxis>,
    pub quadrature: QuadratureSpec,
    pub second_order: SecondOrderConfig,
    pub profile: Option<MultiplierField1D>,
    pub relax: RelaxConfig,
    pub hbar_scale: f64,
    pub output: Option<PathBuf>,
}

impl Scenario {
    pub fn from_config(cfg: RunConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        let material = Material::from_config(&cfg.material)?;
        let model = material.model()?;
        let dim = model.dim();

        for ch in &cfg.channels {
            let graphene_channel = matches!(
                ch.kind,
                ChannelName::GrapheneAcoustic | ChannelName::GrapheneOptical | ChannelName::GrapheneK
            );
            if graphene_channel != material.is_graphene() {
                return Err(invalid(format!("{} channel does not match the material", ch.kind.label())));
            }
            ch.build(material.temperature(), None, 1.0)?;
        }
        for axis in &cfg.sweep {
            if axis.count < 1 {
                return Err(invalid(format!("sweep over {} needs count >= 1", axis.parameter.label())));
            }
            if !axis.min.is_finite() || !axis.max.is_finite() {
                return Err(invalid(format!("sweep over {} has non-finite bounds", axis.parameter.label())));
            }
            if axis.spacing == Spacing::Log && !(axis.min > 0.0 && axis.max > 0.0) {
                return Err(invalid(format!("log sweep over {} needs positive bounds", axis.parameter.label())));
            }
        }
        for (name, v) in [("eta2", &cfg.state.eta2), ("field", &cfg.state.field)] {
            if let Some(v) = v {
                if v.len() != dim {
                    return Err(invalid(format!("state.{name} needs {dim} components, got {}", v.len())));
                }
            }
        }
        if cfg.state.density.is_some() != cfg.state.mean_energy.is_some() {
            return Err(invalid("state.density and state.mean_energy go together"));
        }
        if !cfg.hbar_scale.is_finite() || cfg.hbar_scale < 0.0 {
            return Err(invalid(format!("hbar_scale must be >= 0, got {}", cfg.hbar_scale)));
        }

        let defaults = QuadratureSpec::default();
        let quadrature = QuadratureSpec {
            rel_tol: cfg.quadrature.rel_tol.unwrap_or(defaults.rel_tol),
            abs_tol: cfg.quadrature.abs_tol.unwrap_or(defaults.abs_tol),
            max_subdivisions: cfg.quadrature.max_subdivisions.unwrap_or(defaults.max_subdivisions),
            ..defaults
        };
        quadrature.validate().map_err(|e| invalid(format!("quadrature: {e}")))?;

        let profile = match &cfg.second_order.profile {
            Some(rel) => {
                let path = base_dir.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path, source })?;
                let boundary = if cfg.second_order.periodic {
                    Boundary::Periodic
                } else {
                    Boundary::OneSidedExtrapolation
                };
                let field =
                    MultiplierField1D::from_csv(&text, dim, boundary).map_err(|e| invalid(format!("profile: {e}")))?;
                if cfg.second_order.profile_index >= field.len() {
                    return Err(invalid(format!(
                        "profile_index {} outside a profile of {} points",
                        cfg.second_order.profile_index,
                        field.len()
                    )));
                }
                Some(field)
            }
            None => None,
        };
        if !(cfg.relax.dt.is_finite() && cfg.relax.dt > 0.0 && cfg.relax.t_max.is_finite() && cfg.relax.t_max > 0.0) {
            return Err(invalid("relax.dt and relax.t_max must be > 0"));
        }

        Ok(Self {
            material,
            channels: cfg.channels,
            state: cfg.state,
            axes: cfg.sweep,
            quadrature,
            second_order: cfg.second_order,
            profile,
            relax: cfg.relax,
            hbar_scale: cfg.hbar_scale,
            output: cfg.output,
        })
    }

    pub fn dim(&self) -> usize {
        if self.material.is_graphene() {
            2
        } else {
            3
        }
    }

    /// Cartesian product of the sweep axes, first axis outermost.
    pub fn points(&self) -> Vec<Vec<(SweepParameter, f64)>> {
        let mut points = vec![vec![]];
        for axis in &self.axes {
            let values = axis.values();
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((axis.parameter, v));
                        p
                    })
                })
                .collect();
        }
        points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        Scenario::from_config(cfg, Path::new("."))
    }

    #[test]
    fn presets_expand() {
        let s = parse("[material]\npreset = \"graphene-gapped\"\n").unwrap();
        match s.material {
            Material::Graphene { gap_energy, v_fermi, .. } => {
                assert_eq!(gap_energy, 0.05);
                assert_eq!(v_fermi, 1e6);
            }
            _ => panic!("expected graphene"),
        }
        let s = parse("[material]\npreset = \"silicon-kane\"\ntemperature = 77\n").unwrap();
        assert_eq!(s.material.temperature(), 77.0);
        assert_eq!(s.dim(), 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(parse("[material]\npreset = \"diamond\"\n").is_err());
        assert!(parse("[material]\npreset = \"graphene\"\nm_star = 0.2\n").is_err());
        assert!(parse("[material]\npreset = \"graphene\"\n[[sweep]]\nparameter = \"eta0\"\nmin = 0\nmax = 1\ncount = 0\n").is_err());
        assert!(parse("[material]\npreset = \"graphene\"\n[[channels]]\nkind = \"silicon-optical\"\ncoupling = 1.0\nphonon_energy = 0.06\n").is_err());
        assert!(parse("[material]\npreset = \"graphene\"\ncolour = 3\n").is_err());
    }

    #[test]
    fn sweep_product_order() {
        let s = parse(
            "[material]\npreset = \"graphene\"\n\
             [[sweep]]\nparameter = \"eta0\"\nmin = -1\nmax = 1\ncount = 3\n\
             [[sweep]]\nparameter = \"density\"\nmin = 1e15\nmax = 1e17\ncount = 3\nspacing = \"log\"\n",
        );
        let s = s.unwrap();
        let pts = s.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0][0].1, -1.0);
        assert_eq!(pts[1][0].1, -1.0);
        assert!((pts[1][1].1 / 1e16 - 1.0).abs() < 1e-12);
        assert_eq!(pts[3][0].1, 0.0);
    }
}
