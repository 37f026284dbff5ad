//! The four batch verbs. Each sweep point is evaluated independently and
//! rows are returned in sweep order.

use nalgebra::DVector;
use qmep_core::closure_second::{invert_second_order, psi_moments, SecondOrderRHS};
use qmep_core::collisions::{density_balance_residual, production, relaxation_time, PhononChannel};
use qmep_core::constants::EV;
use qmep_core::transport::{mobility_second, mobility_zeroth, relax_to_steady, BulkState, RelaxOptions};
use qmep_core::{
    constraints_forward, invert_constraints, DispersionModel, InversionOptions, MomentVector, Multipliers, Order,
};
use rayon::prelude::*;

use crate::config::{Scenario, SweepParameter};
use crate::table::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Invert,
    Mobility,
    Relax,
    Production,
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Invert => "invert",
            Verb::Mobility => "mobility",
            Verb::Relax => "relax",
            Verb::Production => "production",
        }
    }
}

/// Inputs of one sweep point after applying the sweep values to the base state.
#[derive(Debug, Clone)]
struct Point {
    eta0: Option<f64>,
    eta1: Option<f64>,
    density: Option<f64>,
    mean_energy: Option<f64>,
    temperature: f64,
    coupling_scale: f64,
    phonon_energy: Option<f64>,
    field: Option<f64>,
}

/// A failed point: the message and whatever row cells were computed first.
#[derive(Debug, Clone)]
struct Failure {
    message: String,
    partial: Vec<Cell>,
}

impl From<String> for Failure {
    fn from(message: String) -> Self {
        Self {
            message,
            partial: vec![],
        }
    }
}

impl From<&str> for Failure {
    fn from(message: &str) -> Self {
        message.to_string().into()
    }
}

type PointResult = Result<Vec<Vec<Cell>>, Failure>;

struct Context<'a> {
    scenario: &'a Scenario,
    point: Point,
    model: DispersionModel,
    inversion: InversionOptions,
}

impl Context<'_> {
    fn channels(&self) -> Result<Vec<PhononChannel>, String> {
        self.scenario
            .channels
            .iter()
            .map(|c| {
                c.build(self.point.temperature, self.point.phonon_energy, self.point.coupling_scale)
                    .map_err(|e| e.to_string())
            })
            .collect()
    }

    fn eta2(&self) -> DVector<f64> {
        match &self.scenario.state.eta2 {
            Some(v) => DVector::from_column_slice(v),
            None => DVector::zeros(self.model.dim()),
        }
    }

    fn field(&self) -> DVector<f64> {
        let dim = self.model.dim();
        let base = match &self.scenario.state.field {
            Some(v) => DVector::from_column_slice(v),
            None => DVector::zeros(dim),
        };
        match self.point.field {
            Some(magnitude) => {
                let norm = base.norm();
                let direction = if norm > 0.0 { base / norm } else { DVector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 0.0 }) };
                direction * magnitude
            }
            None => base,
        }
    }

    /// Target moments from density and mean energy, if both are set.
    fn target(&self) -> Option<MomentVector> {
        match (self.point.density, self.point.mean_energy) {
            (Some(n), Some(e)) => Some(MomentVector::new(n, n * e * EV, DVector::zeros(self.model.dim()), Order::Zeroth)),
            _ => None,
        }
    }

    /// Zeroth-order multipliers: from the profile, the density/energy target,
    /// or the configured multipliers, in that order.
    fn multipliers(&self) -> Result<Multipliers, String> {
        if let Some(profile) = &self.scenario.profile {
            return profile
                .multipliers_at(self.scenario.second_order.profile_index)
                .map_err(|e| e.to_string());
        }
        if let Some(target) = self.target() {
            let inv = invert_constraints(&self.model, &target, None, &self.inversion).map_err(|e| e.to_string())?;
            return Ok(inv.multipliers);
        }
        let eta0 = self.point.eta0.ok_or("state needs eta0 or density and mean_energy")?;
        Ok(Multipliers::zeroth(eta0, self.point.eta1.unwrap_or(1.0), self.eta2()))
    }

    fn second_order_rhs(&self) -> Result<SecondOrderRHS, String> {
        match &self.scenario.profile {
            Some(profile) => psi_moments(&self.model, profile, self.scenario.second_order.profile_index, &self.inversion.quadrature)
                .map_err(|e| e.to_string()),
            None => Ok(SecondOrderRHS::zero(self.model.dim())),
        }
    }
}

fn resolve(scenario: &Scenario, sweep: Vec<(SweepParameter, f64)>) -> Result<Context<'_>, String> {
    let s = &scenario.state;
    let mut p = Point {
        eta0: s.eta0,
        eta1: s.eta1,
        density: s.density,
        mean_energy: s.mean_energy,
        temperature: scenario.material.temperature(),
        coupling_scale: 1.0,
        phonon_energy: None,
        field: None,
    };
    for (param, v) in sweep {
        match param {
            SweepParameter::Eta0 => p.eta0 = Some(v),
            SweepParameter::Eta1 => p.eta1 = Some(v),
            SweepParameter::Density => p.density = Some(v),
            SweepParameter::MeanEnergy => p.mean_energy = Some(v),
            SweepParameter::Temperature => p.temperature = v,
            SweepParameter::CouplingScale => p.coupling_scale = v,
            SweepParameter::PhononEnergy => p.phonon_energy = Some(v),
            SweepParameter::Field => p.field = Some(v),
        }
    }
    let model = scenario
        .material
        .with_temperature(p.temperature)
        .model()
        .map_err(|e| e.to_string())?;
    Ok(Context {
        scenario,
        point: p,
        model,
        inversion: InversionOptions {
            quadrature: scenario.quadrature,
            ..InversionOptions::default()
        },
    })
}

fn vector_header(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}_{i}")).collect()
}

fn nums(v: &DVector<f64>) -> impl Iterator<Item = Cell> + '_ {
    v.iter().map(|&x| Cell::Num(x))
}

fn invert_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["n".into(), "w".into()];
    h.extend(vector_header("j", dim));
    h.extend(["eta0".into(), "eta1".into()]);
    h.extend(vector_header("eta2", dim));
    h.extend(["residual".into(), "iterations".into(), "compatible".into()]);
    h
}

fn run_invert(ctx: &Context) -> PointResult {
    let spec = &ctx.inversion.quadrature;
    let target = match ctx.target() {
        Some(t) => t,
        None => {
            let eta0 = ctx.point.eta0.ok_or("state needs eta0 or density and mean_energy")?;
            let mult = Multipliers::zeroth(eta0, ctx.point.eta1.unwrap_or(1.0), ctx.eta2());
            constraints_forward(&ctx.model, &mult, spec).map_err(|e| e.to_string())?
        }
    };
    let mut row: Vec<Cell> = vec![Cell::Num(target.n), Cell::Num(target.w)];
    row.extend(nums(&target.j));
    match invert_constraints(&ctx.model, &target, None, &ctx.inversion) {
        Ok(inv) => {
            let m = &inv.multipliers;
            row.extend([Cell::Num(m.eta0), Cell::Num(m.eta1)]);
            row.extend(nums(&m.eta2));
            row.extend([
                Cell::Num(inv.residual),
                Cell::Int(inv.iterations),
                Cell::Bool(inv.compatibility.is_satisfied()),
            ]);
            Ok(vec![row])
        }
        Err(e) => Err(Failure {
            message: e.to_string(),
            partial: row,
        }),
    }
}

fn mobility_header() -> Vec<String> {
    [
        "n0",
        "n2",
        "eta0",
        "eta1",
        "tau",
        "opposes_drift",
        "mu0",
        "mu2",
        "mu_total",
        "abs_mu_total",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run_mobility(ctx: &Context) -> PointResult {
    let spec = &ctx.inversion.quadrature;
    let channels = ctx.channels()?;
    if channels.is_empty() {
        return Err("mobility needs at least one channel".into());
    }
    let mut mult0 = ctx.multipliers()?;
    mult0.eta2 = DVector::zeros(ctx.model.dim());
    let relax = relaxation_time(&ctx.model, &mult0, &channels, spec).map_err(|e| e.to_string())?;
    let hbar_scale = ctx.scenario.hbar_scale;
    let mobility = if hbar_scale == 0.0 {
        mobility_zeroth(&ctx.model, &mult0, relax.tau, spec).map_err(|e| e.to_string())?
    } else {
        let m0 = constraints_forward(&ctx.model, &mult0, spec).map_err(|e| e.to_string())?;
        let so = &ctx.scenario.second_order;
        let target2 = MomentVector::new(
            so.density_ratio * m0.n,
            so.energy_ratio * m0.w,
            DVector::zeros(ctx.model.dim()),
            Order::Second,
        );
        let rhs = ctx.second_order_rhs()?;
        let mult2 = invert_second_order(&ctx.model, &mult0, &target2, &rhs, spec).map_err(|e| e.to_string())?;
        let gradient = match &ctx.scenario.profile {
            Some(p) => Some(p.derivatives(so.profile_index).map_err(|e| e.to_string())?.0),
            None => None,
        };
        mobility_second(&ctx.model, &mult0, &mult2, m0.n, target2.n, relax.tau, gradient.as_ref(), spec)
            .map_err(|e| e.to_string())?
    };
    let total = mobility.total(hbar_scale)[(0, 0)];
    Ok(vec![vec![
        Cell::Num(mobility.n0),
        Cell::Num(mobility.n2),
        Cell::Num(mult0.eta0),
        Cell::Num(mult0.eta1),
        Cell::Num(relax.tau),
        Cell::Bool(relax.opposes_drift),
        Cell::Num(mobility.mu0[(0, 0)]),
        Cell::Num(mobility.mu2[(0, 0)]),
        Cell::Num(total),
        Cell::Num(total.abs()),
    ]])
}

fn relax_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["time".into(), "n".into(), "w".into()];
    h.extend(vector_header("j0", dim));
    h.extend(vector_header("j2", dim));
    h.extend(["eta0".into(), "eta1".into()]);
    h.extend(vector_header("eta2", dim));
    h.push("tau".into());
    h
}

fn run_relax(ctx: &Context) -> PointResult {
    let dim = ctx.model.dim();
    let spec = &ctx.inversion.quadrature;
    let channels = ctx.channels()?;
    if channels.is_empty() {
        return Err("relax needs at least one channel".into());
    }
    let mut mult = ctx.multipliers()?;
    if let Some(hot) = ctx.scenario.relax.hot_eta1 {
        mult.eta1 = hot;
    }
    let m0 = constraints_forward(&ctx.model, &mult, spec).map_err(|e| e.to_string())?;
    let so = &ctx.scenario.second_order;
    let mut initial = BulkState::semiclassical(m0.clone(), ctx.field());
    initial.moments2 = MomentVector::new(so.density_ratio * m0.n, so.energy_ratio * m0.w, DVector::zeros(dim), Order::Second);
    let defaults = RelaxOptions::default();
    let gradient = match &ctx.scenario.profile {
        Some(p) => Some(p.derivatives(so.profile_index).map_err(|e| e.to_string())?.0),
        None => None,
    };
    let options = RelaxOptions {
        inversion: ctx.inversion,
        stationarity_tol: ctx.scenario.relax.stationarity_tol.unwrap_or(defaults.stationarity_tol),
        max_steps: ctx.scenario.relax.max_steps.unwrap_or(defaults.max_steps),
        min_steps: ctx.scenario.relax.min_steps,
        hbar_scale: ctx.scenario.hbar_scale,
        gradient,
        ..defaults
    };
    let trajectory = relax_to_steady(&ctx.model, &channels, &initial, ctx.scenario.relax.dt, ctx.scenario.relax.t_max, &options)
        .map_err(|e| e.to_string())?;
    let s2 = ctx.scenario.hbar_scale * ctx.scenario.hbar_scale;
    let rows = trajectory
        .points
        .iter()
        .map(|p| {
            let mut row = vec![Cell::Num(p.time), Cell::Num(p.n), Cell::Num(p.w)];
            row.extend(nums(&p.j0));
            row.extend(p.j2.iter().map(|&x| Cell::Num(s2 * x)));
            row.extend([Cell::Num(p.multipliers.eta0), Cell::Num(p.multipliers.eta1)]);
            row.extend(nums(&p.multipliers.eta2));
            row.push(Cell::Num(p.tau));
            row
        })
        .collect::<Vec<_>>();
    if trajectory.converged {
        Ok(rows)
    } else {
        Err(Failure {
            message: format!("no steady state by t_max after {} points", rows.len()),
            partial: rows.last().cloned().unwrap_or_default(),
        })
    }
}

fn production_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["channel", "eta0", "eta1", "c_n", "c_w", "reduced_c_w", "momentum_coefficient"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(vector_header("c_j", dim));
    h.extend(["detailed_balance".into(), "density_residual".into()]);
    h
}

fn run_production(ctx: &Context) -> PointResult {
    let spec = &ctx.inversion.quadrature;
    let channels = ctx.channels()?;
    let mult = ctx.multipliers()?;
    let equilibrium = Multipliers::zeroth(mult.eta0, 1.0, DVector::zeros(ctx.model.dim()));
    let mut rows = vec![];
    for (cfg, ch) in ctx.scenario.channels.iter().zip(&channels) {
        let p = production(&ctx.model, &mult, ch, spec).map_err(|e| e.to_string())?;
        let balance = production(&ctx.model, &equilibrium, ch, spec).map_err(|e| e.to_string())?;
        let residual = density_balance_residual(&ctx.model, &mult, ch, spec).map_err(|e| e.to_string())?;
        let mut row = vec![
            Cell::Text(cfg.kind.label().into()),
            Cell::Num(mult.eta0),
            Cell::Num(mult.eta1),
            Cell::Num(p.c_n),
            Cell::Num(p.c_w),
            Cell::Num(p.reduced_c_w),
            Cell::Num(p.momentum_coefficient),
        ];
        row.extend(nums(&p.c_j));
        row.extend([Cell::Num(balance.reduced_c_w), Cell::Num(residual)]);
        rows.push(row);
    }
    Ok(rows)
}

/// Evaluates every sweep point on the current rayon pool.
pub fn run(verb: Verb, scenario: &Scenario) -> Table {
    let dim = scenario.dim();
    let mut header: Vec<String> = scenario.axes.iter().map(|a| format!("sweep_{}", a.parameter.label())).collect();
    if verb == Verb::Relax {
        header.push("point".into());
    }
    let body = match verb {
        Verb::Invert => invert_header(dim),
        Verb::Mobility => mobility_header(),
        Verb::Relax => relax_header(dim),
        Verb::Production => production_header(dim),
    };
    let width = body.len();
    header.extend(body);
    header.push("status".into());

    let points = scenario.points();
    let results: Vec<PointResult> = points
        .par_iter()
        .map(|sweep| {
            let ctx = resolve(scenario, sweep.clone()).map_err(Failure::from)?;
            match verb {
                Verb::Invert => run_invert(&ctx),
                Verb::Mobility => run_mobility(&ctx),
                Verb::Relax => run_relax(&ctx),
                Verb::Production => run_production(&ctx),
            }
        })
        .collect();

    let mut table = Table::new(verb.name(), header);
    for (index, (sweep, result)) in points.iter().zip(results).enumerate() {
        let mut prefix: Vec<Cell> = sweep.iter().map(|(_, v)| Cell::Num(*v)).collect();
        if verb == Verb::Relax {
            prefix.push(Cell::Int(index));
        }
        match result {
            Ok(rows) => {
                for row in rows {
                    let mut full = prefix.clone();
                    full.extend(row);
                    full.push(Cell::Text("ok".into()));
                    table.push(full);
                }
            }
            Err(Failure { message, mut partial }) => {
                let mut full = prefix.clone();
                partial.resize(width, Cell::Empty);
                full.extend(partial);
                full.push(Cell::Text(format!("failed: {message}")));
                table.push_failure(full);
            }
        }
    }
    table
}
