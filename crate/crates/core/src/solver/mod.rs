//! Explicit finite-volume integrator for compressible Navier-Stokes on the
//! channel, with no-slip or Navier slip walls and a per-step energy ledger.
//!
//! Conserved variables `(rho, rho u, rho v)` live at cell centers. One step is
//! SSP-RK2 over the semi-discretization in [`kernel`].

mod kernel;
pub mod snapshot;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{lp_norm, ChannelGrid, VectorField};
use crate::error::{invalid, Error, Result};
use crate::exec::{sum_rows, Execution};
use crate::reference::EulerReference;
use crate::tensor::{contraction_mu_eta, Tensor2, ViscosityParams};
use crate::thermo::GasLaw;

use kernel::{Combine, Geometry, Ghosted, RowInputs};

/// Densities at or below this are treated as vacuum when recovering velocity.
pub const VACUUM_FLOOR: f64 = 1e-10;
pub const DEFAULT_CFL: f64 = 0.4;

/// Density and momentum per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidField {
    pub rho: Vec<f64>,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
}

impl FluidField {
    pub fn from_primitive(rho: Vec<f64>, u: &VectorField) -> Self {
        let mx = rho.iter().zip(&u.x).map(|(r, a)| r * a).collect();
        let my = rho.iter().zip(&u.y).map(|(r, b)| r * b).collect();
        Self { rho, mx, my }
    }

    pub fn uniform(grid: &ChannelGrid, rho: f64, u: [f64; 2]) -> Self {
        let n = grid.cells();
        Self {
            rho: vec![rho; n],
            mx: vec![rho * u[0]; n],
            my: vec![rho * u[1]; n],
        }
    }

    pub fn cells(&self) -> usize {
        self.rho.len()
    }

    #[inline]
    pub fn velocity_at(&self, c: usize) -> [f64; 2] {
        let r = self.rho[c];
        if r > VACUUM_FLOOR {
            [self.mx[c] / r, self.my[c] / r]
        } else {
            [0.0, 0.0]
        }
    }

    pub fn velocity(&self) -> VectorField {
        let (x, y) = (0..self.cells())
            .map(|c| {
                let v = self.velocity_at(c);
                (v[0], v[1])
            })
            .unzip();
        VectorField { x, y }
    }

    pub fn mass(&self, grid: &ChannelGrid) -> f64 {
        crate::domain::integrate(&self.rho, grid)
    }

    /// `E = int rho |u|^2 / 2 + H(rho)`.
    pub fn energy(&self, grid: &ChannelGrid, law: GasLaw) -> f64 {
        let nx = grid.nx();
        (0..grid.ny())
            .map(|j| {
                let row: f64 = (j * nx..(j + 1) * nx)
                    .map(|c| {
                        let [u, v] = self.velocity_at(c);
                        0.5 * self.rho[c] * (u * u + v * v) + law.h(self.rho[c].max(0.0))
                    })
                    .sum();
                row * grid.row_volume(j)
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.rho
            .iter()
            .chain(&self.mx)
            .chain(&self.my)
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    NoSlip,
    Navier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub kind: BcKind,
    pub beta: f64,
}

impl BoundaryCondition {
    pub fn no_slip() -> Self {
        Self {
            kind: BcKind::NoSlip,
            beta: 0.0,
        }
    }

    pub fn navier(beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("{beta} must be >= 0")));
        }
        Ok(Self {
            kind: BcKind::Navier,
            beta,
        })
    }
}

/// Everything that defines the continuous problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub law: GasLaw,
    pub visc: ViscosityParams,
    pub bc: BoundaryCondition,
    /// `false` drops the viscous fluxes (the `eps = 0` convective system).
    pub viscous: bool,
}

impl Model {
    pub fn new(law: GasLaw, visc: ViscosityParams, bc: BoundaryCondition) -> Result<Self> {
        visc.validate()?;
        Ok(Self {
            law,
            visc,
            bc,
            viscous: true,
        })
    }

    pub fn convective_only(mut self) -> Self {
        self.viscous = false;
        self
    }
}

/// Volumetric forcing added to `(mass, x-momentum, y-momentum)`.
pub trait Source: Send + Sync {
    fn eval(&self, t: f64, x: f64, y: f64) -> [f64; 3];
}

/// Primitive fields extended by one ghost row at each wall.
#[derive(Debug, Clone)]
pub struct GhostState {
    pub nx: usize,
    pub ny: usize,
    /// Row-major over `ny + 2` rows; row 0 and row `ny + 1` are ghosts.
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl GhostState {
    /// Value at interior row `j` in `-1..=ny` (shifted by one internally).
    pub fn at(&self, i: usize, j: isize) -> (f64, f64, f64) {
        let c = (j + 1) as usize * self.nx + i;
        (self.rho[c], self.u[c], self.v[c])
    }
}

pub fn apply_boundary(state: &FluidField, grid: &ChannelGrid, model: &Model) -> GhostState {
    let geo = Geometry::new(grid);
    let mut g = Ghosted::default();
    kernel::fill_ghosted(Execution::Sequential, state, &geo, model, &mut g);
    GhostState {
        nx: grid.nx(),
        ny: grid.ny(),
        rho: g.rho,
        u: g.u,
        v: g.v,
    }
}

/// Velocity at the wall faces: the average of the first interior value and
/// its ghost, for the bottom and top walls.
#[derive(Debug, Clone, PartialEq)]
pub struct WallTrace {
    pub bottom: Vec<[f64; 2]>,
    pub top: Vec<[f64; 2]>,
}

impl WallTrace {
    /// `sum dx |u_w|^2` over both walls.
    pub fn sq_integral(&self, dx: f64) -> f64 {
        self.bottom
            .iter()
            .chain(&self.top)
            .map(|w| w[0] * w[0] + w[1] * w[1])
            .sum::<f64>()
            * dx
    }

    pub fn max_abs(&self) -> f64 {
        self.bottom
            .iter()
            .chain(&self.top)
            .fold(0.0, |m, w| m.max(w[0].hypot(w[1])))
    }
}

pub fn wall_trace(state: &FluidField, grid: &ChannelGrid, model: &Model) -> WallTrace {
    let nx = grid.nx();
    let ny = grid.ny();
    let kb = kernel::tangential_factor(model, grid.heights()[0]);
    let kt = kernel::tangential_factor(model, grid.heights()[ny - 1]);
    let row = |j: usize, k: f64| -> Vec<[f64; 2]> {
        (0..nx)
            .map(|i| {
                let [u, _] = state.velocity_at(grid.idx(i, j));
                [0.5 * (1.0 + k) * u, 0.0]
            })
            .collect()
    };
    WallTrace {
        bottom: row(0, kb),
        top: row(ny - 1, kt),
    }
}

/// Cell-centered velocity gradient that uses the wall ghosts, so the wall
/// condition enters the normal derivative of the first cell.
pub fn velocity_gradient(state: &FluidField, grid: &ChannelGrid, model: &Model) -> Vec<Tensor2> {
    let geo = Geometry::new(grid);
    let mut g = Ghosted::default();
    kernel::fill_ghosted(Execution::Sequential, state, &geo, model, &mut g);
    let (mut dyu, mut dyv) = (Vec::new(), Vec::new());
    kernel::fill_dy(Execution::Sequential, &g, &geo, &mut dyu, &mut dyv);
    let nx = grid.nx();
    let inv2dx = 0.5 / grid.dx();
    let mut out = vec![Tensor2::zero(); grid.cells()];
    for j in 0..grid.ny() {
        let r = (j + 1) * nx;
        for i in 0..nx {
            let ip = if i + 1 == nx { 0 } else { i + 1 };
            let im = if i == 0 { nx - 1 } else { i - 1 };
            let c = j * nx + i;
            out[c] = Tensor2::new2(
                [(g.u[r + ip] - g.u[r + im]) * inv2dx, dyu[c]],
                [(g.v[r + ip] - g.v[r + im]) * inv2dx, dyv[c]],
            );
        }
    }
    out
}

/// Instantaneous `(eps int S(grad u):grad u, beta int_walls |u|^2)`.
pub fn dissipation_rates(state: &FluidField, grid: &ChannelGrid, model: &Model) -> (f64, f64) {
    if !model.viscous {
        return (0.0, 0.0);
    }
    let grad = velocity_gradient(state, grid, model);
    let nx = grid.nx();
    let visc = (0..grid.ny())
        .map(|j| {
            let row: f64 = grad[j * nx..(j + 1) * nx]
                .iter()
                .map(|g| contraction_mu_eta(g, model.visc.mu, model.visc.eta))
                .sum();
            row * grid.row_volume(j)
        })
        .sum::<f64>()
        * model.visc.eps;
    let fric = match model.bc.kind {
        BcKind::NoSlip => 0.0,
        BcKind::Navier => model.bc.beta * wall_trace(state, grid, model).sq_integral(grid.dx()),
    };
    (visc, fric)
}

/// `CFL * min_cells min(h / (|u| + c_s), h^2 rho / (2 eps (2 mu + eta)))`
/// with `h = min(dx, h_j)`.
pub fn stable_dt(state: &FluidField, grid: &ChannelGrid, model: &Model, cfl: f64) -> f64 {
    let nx = grid.nx();
    let dx = grid.dx();
    let k = 2.0 * model.visc.eps * (2.0 * model.visc.mu + model.visc.eta);
    let dt = (0..grid.ny())
        .map(|j| {
            let h = dx.min(grid.heights()[j]);
            (j * nx..(j + 1) * nx)
                .map(|c| {
                    let rho = state.rho[c];
                    let [u, v] = state.velocity_at(c);
                    let mut d = h / (u.hypot(v) + model.law.sound_speed(rho));
                    if model.viscous {
                        d = d.min(h * h * rho / k);
                    }
                    d
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);
    cfl * dt
}

#[derive(Debug, Clone, Default)]
struct Workspace {
    ghost: Ghosted,
    dyu: Vec<f64>,
    dyv: Vec<f64>,
    fy: [Vec<f64>; 3],
    stage: Option<FluidField>,
}

/// A configured integrator that owns its scratch buffers.
pub struct Solver {
    grid: ChannelGrid,
    geo: Geometry,
    model: Model,
    exec: Execution,
    cfl: f64,
    source: Option<Arc<dyn Source>>,
    work: Workspace,
}

impl Solver {
    pub fn new(grid: ChannelGrid, model: Model, exec: Execution) -> Result<Self> {
        model.visc.validate()?;
        Ok(Self {
            geo: Geometry::new(&grid),
            grid,
            model,
            exec,
            cfl: DEFAULT_CFL,
            source: None,
            work: Workspace::default(),
        })
    }

    pub fn with_cfl(mut self, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(invalid("cfl", format!("{cfl} must be in (0, 1]")));
        }
        self.cfl = cfl;
        Ok(self)
    }

    pub fn with_source(mut self, source: Arc<dyn Source>) -> Self {
        self.source = Some(source);
        self
    }

    pub fn grid(&self) -> &ChannelGrid {
        &self.grid
    }
    pub fn model(&self) -> &Model {
        &self.model
    }
    pub fn cfl(&self) -> f64 {
        self.cfl
    }

    pub fn stable_dt(&self, state: &FluidField) -> f64 {
        stable_dt(state, &self.grid, &self.model, self.cfl)
    }

    fn rhs_inputs(&mut self, state: &FluidField) {
        let w = &mut self.work;
        kernel::fill_ghosted(self.exec, state, &self.geo, &self.model, &mut w.ghost);
        if self.model.viscous {
            kernel::fill_dy(self.exec, &w.ghost, &self.geo, &mut w.dyu, &mut w.dyv);
        } else {
            w.dyu.resize(state.cells(), 0.0);
            w.dyv.resize(state.cells(), 0.0);
        }
        kernel::fill_y_fluxes(self.exec, &w.ghost, &self.geo, &self.model, &mut w.fy);
    }

    /// One SSP-RK2 step from time `t`. On failure `state` holds the partial
    /// update and the error carries the location.
    pub fn step(&mut self, state: &mut FluidField, t: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("{dt} must be > 0")));
        }
        let mut stage = self.work.stage.take().unwrap_or_else(|| state.clone());
        stage.clone_from(state);

        self.rhs_inputs(state);
        {
            let w = &self.work;
            let inp = RowInputs {
                g: &w.ghost,
                geo: &self.geo,
                model: &self.model,
                dyu: &w.dyu,
                dyv: &w.dyv,
                fy: &w.fy,
                source: self.source.as_deref(),
                time: t,
                dt,
            };
            kernel::update(self.exec, &inp, &mut stage, Combine::Forward);
        }
        self.check(&stage, t, dt)?;

        self.rhs_inputs(&stage);
        {
            let w = &self.work;
            let inp = RowInputs {
                g: &w.ghost,
                geo: &self.geo,
                model: &self.model,
                dyu: &w.dyu,
                dyv: &w.dyv,
                fy: &w.fy,
                source: self.source.as_deref(),
                time: t + dt,
                dt,
            };
            kernel::update(self.exec, &inp, state, Combine::Average(&stage));
        }
        self.work.stage = Some(stage);
        self.check(state, t, dt)
    }

    fn check(&self, s: &FluidField, t: f64, dt: f64) -> Result<()> {
        let nx = self.grid.nx();
        for c in 0..s.cells() {
            let r = s.rho[c];
            if !(r.is_finite() && s.mx[c].is_finite() && s.my[c].is_finite()) {
                return Err(Error::NonFinite { time: t, dt });
            }
            if r < 0.0 {
                return Err(Error::VacuumBreach {
                    time: t,
                    dt,
                    rho: r,
                    i: c % nx,
                    j: c / nx,
                });
            }
        }
        Ok(())
    }

    /// `(E, eps int S(grad u):grad u, beta int_walls |u|^2)` using the
    /// solver's buffers; equal to [`FluidField::energy`] and
    /// [`dissipation_rates`].
    pub fn energy_and_rates(&mut self, state: &FluidField) -> (f64, f64, f64) {
        let w = &mut self.work;
        kernel::fill_ghosted(self.exec, state, &self.geo, &self.model, &mut w.ghost);
        kernel::fill_dy(self.exec, &w.ghost, &self.geo, &mut w.dyu, &mut w.dyv);
        let nx = self.grid.nx();
        let g = &w.ghost;
        let (dyu, dyv) = (&w.dyu, &w.dyv);
        let model = &self.model;
        let grid = &self.grid;
        let inv2dx = 0.5 / grid.dx();
        let rows = crate::exec::map_collect(self.exec, grid.ny(), |j| {
            let r = (j + 1) * nx;
            let (mut e, mut d) = (0.0, 0.0);
            for i in 0..nx {
                let ip = if i + 1 == nx { 0 } else { i + 1 };
                let im = if i == 0 { nx - 1 } else { i - 1 };
                let c = j * nx + i;
                let (rho, u, v) = (g.rho[r + i], g.u[r + i], g.v[r + i]);
                e += 0.5 * rho * (u * u + v * v) + model.law.h(rho.max(0.0));
                if model.viscous {
                    let t = Tensor2::new2(
                        [(g.u[r + ip] - g.u[r + im]) * inv2dx, dyu[c]],
                        [(g.v[r + ip] - g.v[r + im]) * inv2dx, dyv[c]],
                    );
                    d += contraction_mu_eta(&t, model.visc.mu, model.visc.eta);
                }
            }
            let vol = grid.row_volume(j);
            (e * vol, d * vol)
        });
        let (mut e, mut d) = (0.0, 0.0);
        for (a, b) in rows {
            e += a;
            d += b;
        }
        let fric = match (model.viscous, model.bc.kind) {
            (true, BcKind::Navier) => {
                model.bc.beta * wall_trace(state, grid, model).sq_integral(grid.dx())
            }
            _ => 0.0,
        };
        (e, model.visc.eps * d, fric)
    }

    /// Deterministic (row-ordered) mass; same bits in every execution mode.
    pub fn mass(&self, state: &FluidField) -> f64 {
        let nx = self.grid.nx();
        sum_rows(self.exec, self.grid.ny(), |j| {
            state.rho[j * nx..(j + 1) * nx].iter().sum::<f64>() * self.grid.row_volume(j)
        })
    }
}

/// Convenience single step with a fresh solver (sequential).
pub fn step(
    state: &FluidField,
    grid: &ChannelGrid,
    model: &Model,
    t: f64,
    dt: f64,
) -> Result<FluidField> {
    let mut s = Solver::new(grid.clone(), *model, Execution::Sequential)?;
    let mut out = state.clone();
    s.step(&mut out, t, dt)?;
    Ok(out)
}

/// Initial discrepancy added to the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `rho: sin(2 pi x / L)`, `u: (cos(2 pi x / L), sin(2 pi x / L) sin(pi y))`.
    #[default]
    Standard,
    /// Density-only bump `sin(2 pi x / L)`.
    Density,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    /// Amplitude `delta` of the discrepancy.
    pub delta: f64,
    pub perturbation: Perturbation,
}

/// `(rho_E(0) + delta p_rho, u_E(0) + delta p_u)`; the velocity perturbation
/// has zero normal component at both walls.
pub fn initialize(
    spec: &InitSpec,
    reference: &dyn EulerReference,
    grid: &ChannelGrid,
) -> Result<FluidField> {
    use std::f64::consts::PI;
    if !(spec.delta >= 0.0 && spec.delta.is_finite()) {
        return Err(invalid("delta", format!("{} must be >= 0", spec.delta)));
    }
    let k = 2.0 * PI / grid.length_x();
    let n = grid.cells();
    let mut rho = vec![0.0; n];
    let mut u = VectorField::zeros(grid);
    for j in 0..grid.ny() {
        let y = grid.y_center(j);
        for i in 0..grid.nx() {
            let x = grid.x_center(i);
            let c = grid.idx(i, j);
            let (pr, pu) = match spec.perturbation {
                Perturbation::Standard => (
                    (k * x).sin(),
                    [(k * x).cos(), (k * x).sin() * (PI * y).sin()],
                ),
                Perturbation::Density => ((k * x).sin(), [0.0, 0.0]),
                Perturbation::None => (0.0, [0.0, 0.0]),
            };
            rho[c] = reference.density(0.0, x, y) + spec.delta * pr;
            let ue = reference.velocity(0.0, x, y);
            u.x[c] = ue[0] + spec.delta * pu[0];
            u.y[c] = ue[1] + spec.delta * pu[1];
            if rho[c] < 0.0 {
                return Err(Error::Domain(format!(
                    "initial density {} < 0 at cell ({i}, {j})",
                    rho[c]
                )));
            }
        }
    }
    Ok(FluidField::from_primitive(rho, &u))
}

/// Energy bookkeeping for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub time: f64,
    pub total_energy: f64,
    pub cumulative_viscous_dissipation: f64,
    pub cumulative_friction_dissipation: f64,
    pub initial_energy: f64,
    pub viscous_rate: f64,
    pub friction_rate: f64,
    /// Sum over steps of the positive part of the per-step energy excess.
    pub excess: f64,
}

impl EnergyLedger {
    pub fn start(solver: &mut Solver, state: &FluidField) -> Self {
        let (e, v, f) = solver.energy_and_rates(state);
        Self {
            time: 0.0,
            total_energy: e,
            cumulative_viscous_dissipation: 0.0,
            cumulative_friction_dissipation: 0.0,
            initial_energy: e,
            viscous_rate: v,
            friction_rate: f,
            excess: 0.0,
        }
    }

    /// Trapezoid update after a step of length `dt`.
    pub fn advance(&mut self, solver: &mut Solver, state: &FluidField, dt: f64) {
        let (e, v, f) = solver.energy_and_rates(state);
        let dv = 0.5 * dt * (self.viscous_rate + v);
        let df = 0.5 * dt * (self.friction_rate + f);
        let step_excess = e + dv + df - self.total_energy;
        if step_excess > 0.0 {
            self.excess += step_excess;
        }
        self.time += dt;
        self.total_energy = e;
        self.cumulative_viscous_dissipation += dv;
        self.cumulative_friction_dissipation += df;
        self.viscous_rate = v;
        self.friction_rate = f;
    }

    /// `E(0) - E(t) - dissipations`; nonnegative for an exactly dissipative
    /// scheme.
    pub fn residual(&self) -> f64 {
        self.initial_energy
            - self.total_energy
            - self.cumulative_viscous_dissipation
            - self.cumulative_friction_dissipation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    /// `stable_dt` each step, last step shortened to land on `t_final`.
    Adaptive,
    /// Constant step; `t_final` must be a whole number of steps.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_final: f64,
    /// Record every this many steps (plus the first and last state).
    pub record_every: usize,
    pub time_step: TimeStep,
}

/// What the recorder sees at each sample time.
pub struct Sample<'a> {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub state: &'a FluidField,
    pub ledger: &'a EnergyLedger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub samples: usize,
    pub ledger: EnergyLedger,
    pub min_dt: f64,
    pub max_mass_drift: f64,
}

/// Integrates `state` to `t_final`, calling `recorder` at sample times.
pub fn run(
    solver: &mut Solver,
    state: &mut FluidField,
    cfg: &RunConfig,
    recorder: &mut dyn FnMut(&Sample<'_>) -> Result<()>,
) -> Result<RunSummary> {
    if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
        return Err(invalid("T", format!("{} must be > 0", cfg.t_final)));
    }
    let every = cfg.record_every.max(1);
    let mass0 = solver.mass(state);
    let mut ledger = EnergyLedger::start(solver, state);
    let mut t = 0.0;
    let mut n = 0usize;
    let mut samples = 0usize;
    let mut min_dt = f64::INFINITY;
    let mut drift = 0.0_f64;
    let fixed_steps = match cfg.time_step {
        TimeStep::Fixed(dt) => {
            let k = (cfg.t_final / dt).round();
            if !(dt > 0.0) || ((k * dt - cfg.t_final).abs() > 1e-9 * cfg.t_final) {
                return Err(invalid(
                    "dt",
                    format!("{dt} does not divide T = {}", cfg.t_final),
                ));
            }
            Some((k as usize, dt))
        }
        TimeStep::Adaptive => None,
    };
    recorder(&Sample {
        step: 0,
        time: 0.0,
        dt: 0.0,
        state,
        ledger: &ledger,
    })?;
    samples += 1;
    loop {
        let dt = match fixed_steps {
            Some((k, dt)) => {
                if n >= k {
                    break;
                }
                let limit = solver.stable_dt(state);
                if dt > limit / solver.cfl {
                    return Err(invalid(
                        "dt",
                        format!(
                            "fixed step {dt} exceeds the stability limit {}",
                            limit / solver.cfl
                        ),
                    ));
                }
                dt
            }
            None => {
                let rest = cfg.t_final - t;
                if rest <= 1e-12 * cfg.t_final {
                    break;
                }
                let d = solver.stable_dt(state);
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::NonFinite { time: t, dt: d });
                }
                if d >= rest {
                    rest
                } else if d > 0.5 * rest {
                    // avoid a sliver final step
                    0.5 * rest
                } else {
                    d
                }
            }
        };
        solver.step(state, t, dt)?;
        n += 1;
        t = match fixed_steps {
            Some((_, d)) => n as f64 * d,
            None => t + dt,
        };
        min_dt = min_dt.min(dt);
        ledger.advance(solver, state, dt);
        ledger.time = t;
        let m = solver.mass(state);
        drift = drift.max((m - mass0).abs() / mass0.abs().max(f64::MIN_POSITIVE));
        let last = match fixed_steps {
            Some((k, _)) => n == k,
            None => cfg.t_final - t <= 1e-12 * cfg.t_final,
        };
        if n.is_multiple_of(every) || last {
            recorder(&Sample {
                step: n,
                time: t,
                dt,
                state,
                ledger: &ledger,
            })?;
            samples += 1;
        }
    }
    Ok(RunSummary {
        steps: n,
        samples,
        ledger,
        min_dt,
        max_mass_drift: drift,
    })
}

/// Volume-weighted `L^p` norm of the velocity magnitude.
pub fn velocity_norm(state: &FluidField, grid: &ChannelGrid, p: f64) -> f64 {
    lp_norm(&state.velocity().magnitude(), grid, p, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{shear_flow, Profile};

    fn model(bc: BoundaryCondition, eps: f64) -> Model {
        Model::new(
            GasLaw::new(2.0).unwrap(),
            ViscosityParams::new(1.0, 0.0, eps, bc.beta).unwrap(),
            bc,
        )
        .unwrap()
    }

    #[test]
    fn rest_state_is_fixed_point() {
        let g = ChannelGrid::build(1.0, 8, 16, 2.0).unwrap();
        let m = model(BoundaryCondition::no_slip(), 1e-2);
        let s0 = FluidField::uniform(&g, 1.0, [0.0, 0.0]);
        let dt = stable_dt(&s0, &g, &m, DEFAULT_CFL);
        let s1 = step(&s0, &g, &m, 0.0, dt).unwrap();
        for c in 0..g.cells() {
            assert!((s1.rho[c] - 1.0).abs() < 1e-14);
            assert!(s1.mx[c].abs() < 1e-14 && s1.my[c].abs() < 1e-14);
        }
    }

    #[test]
    fn acoustic_dt_closed_form() {
        let g = ChannelGrid::uniform(1.0, 8, 8).unwrap();
        let m = model(BoundaryCondition::no_slip(), 1e-2).convective_only();
        let s = FluidField::uniform(&g, 1.0, [0.0, 0.0]);
        let dt = stable_dt(&s, &g, &m, 0.4);
        assert!((dt - 0.4 * 0.125 / 2f64.sqrt()).abs() < 1e-15);
        let g2 = ChannelGrid::uniform(1.0, 16, 16).unwrap();
        let s2 = FluidField::uniform(&g2, 1.0, [0.0, 0.0]);
        assert!((stable_dt(&s2, &g2, &m, 0.4) - 0.5 * dt).abs() < 1e-15);
    }

    #[test]
    fn ghosts() {
        let g = ChannelGrid::uniform(1.0, 4, 4).unwrap();
        let s = FluidField::uniform(&g, 1.0, [1.0, 0.0]);
        let ns = apply_boundary(&s, &g, &model(BoundaryCondition::no_slip(), 1e-2));
        assert_eq!(ns.at(0, -1), (1.0, -1.0, -0.0));
        let free = apply_boundary(
            &s,
            &g,
            &model(BoundaryCondition::navier(0.0).unwrap(), 1e-2),
        );
        assert_eq!(free.at(2, 4).1, 1.0);
        let mut last = f64::INFINITY;
        for beta in [1e-2, 1.0, 1e2, 1e6] {
            let m = model(BoundaryCondition::navier(beta).unwrap(), 1e-2);
            let w = wall_trace(&s, &g, &m).max_abs();
            assert!(w < last);
            last = w;
        }
        assert!(last < 1e-6);
        assert_eq!(
            wall_trace(&s, &g, &model(BoundaryCondition::no_slip(), 1e-2)).max_abs(),
            0.0
        );
    }

    #[test]
    fn mass_conserved_and_finite() {
        let g = ChannelGrid::build(2.0, 16, 16, 2.0).unwrap();
        let m = model(BoundaryCondition::navier(0.1).unwrap(), 1e-2);
        let r = shear_flow(Profile::from_name("sine").unwrap());
        let mut s = initialize(
            &InitSpec {
                delta: 0.1,
                perturbation: Perturbation::Standard,
            },
            &r,
            &g,
        )
        .unwrap();
        let mut solver = Solver::new(g.clone(), m, Execution::Sequential).unwrap();
        let m0 = solver.mass(&s);
        let mut t = 0.0;
        for _ in 0..50 {
            let dt = solver.stable_dt(&s);
            solver.step(&mut s, t, dt).unwrap();
            t += dt;
        }
        assert!(((solver.mass(&s) - m0) / m0).abs() < 1e-13);
        assert!(s.is_finite());
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let g = ChannelGrid::build(1.0, 8, 12, 2.0).unwrap();
        let m = model(BoundaryCondition::no_slip(), 1e-2);
        let r = shear_flow(Profile::from_name("sine").unwrap());
        let init = initialize(
            &InitSpec {
                delta: 0.2,
                perturbation: Perturbation::Standard,
            },
            &r,
            &g,
        )
        .unwrap();
        let mut a = init.clone();
        let mut b = init;
        let mut sa = Solver::new(g.clone(), m, Execution::Sequential).unwrap();
        let mut sb = Solver::new(g, m, Execution::Parallel).unwrap();
        for k in 0..5 {
            sa.step(&mut a, k as f64 * 1e-4, 1e-4).unwrap();
            sb.step(&mut b, k as f64 * 1e-4, 1e-4).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn solver_rates_match_free_functions() {
        let g = ChannelGrid::build(1.0, 8, 12, 3.0).unwrap();
        let m = model(BoundaryCondition::navier(0.3).unwrap(), 1e-2);
        let r = shear_flow(Profile::from_name("sine").unwrap());
        let s = initialize(
            &InitSpec {
                delta: 0.2,
                perturbation: Perturbation::Standard,
            },
            &r,
            &g,
        )
        .unwrap();
        let mut solver = Solver::new(g.clone(), m, Execution::Parallel).unwrap();
        let (e, v, f) = solver.energy_and_rates(&s);
        let (v2, f2) = dissipation_rates(&s, &g, &m);
        assert!((e - s.energy(&g, m.law)).abs() < 1e-13);
        assert!((v - v2).abs() < 1e-13 * v2.abs().max(1.0));
        assert_eq!(f, f2);
        assert!(f > 0.0 && v > 0.0);
    }

    #[test]
    fn negative_density_aborts() {
        let g = ChannelGrid::uniform(1.0, 8, 8).unwrap();
        let m = model(BoundaryCondition::no_slip(), 1e-2);
        let mut s = FluidField::uniform(&g, 1.0, [0.0, 0.0]);
        s.rho[10] = 1e-6;
        s.mx[9] = 50.0;
        s.mx[11] = -50.0;
        let mut solver = Solver::new(g, m, Execution::Sequential).unwrap();
        let err = solver.step(&mut s, 0.0, 1e-2).unwrap_err();
        assert!(
            matches!(err, Error::VacuumBreach { .. } | Error::NonFinite { .. }),
            "{err}"
        );
    }
}
