use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::case::CaseSpec;
use super::fit::fit_order;
use crate::diagnostics::{cadence_check, inequality_residual};
use crate::domain::{integrate, ChannelGrid};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::solver::{run, FluidField, Model, RunConfig, Solver, Source, TimeStep};
use crate::tensor::{stress, Tensor2};
use crate::thermo::GasLaw;

/// Energy-ledger residual series of one fixed-step run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSeries {
    pub dt: f64,
    pub steps: usize,
    pub time: Vec<f64>,
    pub residual: Vec<f64>,
    pub excess: f64,
    pub max_mass_drift: f64,
}

impl LedgerSeries {
    pub fn min_residual(&self) -> f64 {
        self.residual.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Three-level time-refinement study of the energy inequality residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtStudy {
    pub levels: Vec<LedgerSeries>,
    /// `max_t |residual_l - residual_{l+1}|` at shared sample times: the
    /// time-discretization error of level `l`.
    pub differences: Vec<f64>,
    pub order: f64,
}

impl DtStudy {
    /// Whether every level satisfies `min residual >= -tol_l`; the finest
    /// level uses the extrapolated tolerance `d_1^2 / d_0`.
    pub fn slack_within_tolerance(&self) -> bool {
        let d = &self.differences;
        let finest = if d[0] > 0.0 { d[1] * d[1] / d[0] } else { 0.0 };
        let tol = [d[0], d[1], finest];
        self.levels
            .iter()
            .zip(tol)
            .all(|(l, t)| l.min_residual() >= -t)
    }
}

fn ledger_series(
    grid: &ChannelGrid,
    model: Model,
    state0: &FluidField,
    t_final: f64,
    dt: f64,
    record_every: usize,
    exec: Execution,
) -> Result<LedgerSeries> {
    let mut solver = Solver::new(grid.clone(), model, exec)?;
    let mut state = state0.clone();
    let (mut time, mut residual) = (Vec::new(), Vec::new());
    let summary = run(
        &mut solver,
        &mut state,
        &RunConfig {
            t_final,
            record_every,
            time_step: TimeStep::Fixed(dt),
        },
        &mut |s| {
            time.push(s.time);
            residual.push(s.ledger.residual());
            Ok(())
        },
    )?;
    Ok(LedgerSeries {
        dt,
        steps: summary.steps,
        time,
        residual,
        excess: summary.ledger.excess,
        max_mass_drift: summary.max_mass_drift,
    })
}

/// Runs `dt0`, `dt0 / 2`, `dt0 / 4` with sample cadences scaled so the
/// sample times coincide, and fits the order of the residual differences.
pub fn energy_dt_study(
    grid: &ChannelGrid,
    model: Model,
    state0: &FluidField,
    t_final: f64,
    dt0: f64,
    record_every: usize,
    exec: Execution,
) -> Result<DtStudy> {
    let levels: Vec<LedgerSeries> = (0..3)
        .map(|l| {
            let k = 1usize << l;
            ledger_series(
                grid,
                model,
                state0,
                t_final,
                dt0 / k as f64,
                record_every * k,
                exec,
            )
        })
        .collect::<Result<_>>()?;
    let differences: Vec<f64> = levels
        .windows(2)
        .map(|w| {
            w[0].residual
                .iter()
                .zip(&w[1].residual)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let order = (differences[0] / differences[1]).log2();
    Ok(DtStudy {
        levels,
        differences,
        order,
    })
}

/// Steady manufactured solution on the unit-height channel:
/// `rho = 1 + a sin(kx) cos(pi y)`,
/// `u = b sin(pi y) (1 + cos(kx) / 2)`, `v = b sin(kx) sin(pi y)`,
/// with `k = 2 pi / L`. It satisfies the no-slip ghosts to second order.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub model: Model,
    pub length_x: f64,
    pub a: f64,
    pub b: f64,
}

impl Manufactured {
    pub fn new(model: Model, length_x: f64) -> Self {
        Self {
            model,
            length_x,
            a: 0.2,
            b: 0.3,
        }
    }

    fn k(&self) -> f64 {
        2.0 * PI / self.length_x
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        1.0 + self.a * (self.k() * x).sin() * (PI * y).cos()
    }

    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        let k = self.k();
        [
            self.b * (PI * y).sin() * (1.0 + 0.5 * (k * x).cos()),
            self.b * (k * x).sin() * (PI * y).sin(),
        ]
    }

    pub fn velocity_grad(&self, x: f64, y: f64) -> Tensor2 {
        let k = self.k();
        let (sx, cx) = (k * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        Tensor2::new2(
            [
                -0.5 * self.b * k * sy * sx,
                self.b * PI * cy * (1.0 + 0.5 * cx),
            ],
            [self.b * k * cx * sy, self.b * PI * sx * cy],
        )
    }

    /// Total x- and y-fluxes per equation, viscous stress included.
    fn fluxes(&self, x: f64, y: f64) -> ([f64; 3], [f64; 3]) {
        let law: GasLaw = self.model.law;
        let rho = self.density(x, y);
        let [u, v] = self.velocity(x, y);
        let p = law.p(rho);
        let s = stress(&self.velocity_grad(x, y), &self.model.visc);
        let e = self.model.visc.eps;
        let fx = [
            rho * u,
            rho * u * u + p - e * s.0[0][0],
            rho * u * v - e * s.0[1][0],
        ];
        let fy = [
            rho * v,
            rho * u * v - e * s.0[0][1],
            rho * v * v + p - e * s.0[1][1],
        ];
        (fx, fy)
    }

    pub fn exact(&self, grid: &ChannelGrid) -> FluidField {
        let n = grid.cells();
        let mut s = FluidField {
            rho: vec![0.0; n],
            mx: vec![0.0; n],
            my: vec![0.0; n],
        };
        for c in 0..n {
            let (x, y) = (grid.x_center(c % grid.nx()), grid.y_center(grid.row_of(c)));
            let rho = self.density(x, y);
            let [u, v] = self.velocity(x, y);
            s.rho[c] = rho;
            s.mx[c] = rho * u;
            s.my[c] = rho * v;
        }
        s
    }
}

impl Source for Manufactured {
    /// `div F(q) - eps div S` by fourth-order differences of the analytic
    /// fluxes.
    fn eval(&self, _t: f64, x: f64, y: f64) -> [f64; 3] {
        let h = 1e-4;
        let w = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let mut out = [0.0; 3];
        for (m, wm) in w.iter().enumerate() {
            if *wm == 0.0 {
                continue;
            }
            let d = (m as f64 - 2.0) * h;
            let (fx, _) = self.fluxes(x + d, y);
            let (_, fy) = self.fluxes(x, y + d);
            for q in 0..3 {
                out[q] += wm * (fx[q] + fy[q]) / h;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialStudy {
    pub resolutions: Vec<usize>,
    /// Volume-weighted `L^1` error of `(rho, rho u, rho v)` at `t_final`.
    pub errors: Vec<f64>,
    pub order: f64,
}

/// Manufactured-solution convergence study on uniform `n x n` grids with
/// no-slip walls.
pub fn spatial_order_study(
    model: Model,
    resolutions: &[usize],
    t_final: f64,
    exec: Execution,
) -> Result<SpatialStudy> {
    if resolutions.len() < 3 {
        return Err(invalid("resolutions", "need at least three grids"));
    }
    let mut errors = Vec::new();
    for &n in resolutions {
        let grid = ChannelGrid::uniform(1.0, n, n)?;
        let m = Manufactured::new(model, 1.0);
        let exact = m.exact(&grid);
        let mut state = exact.clone();
        let mut solver = Solver::new(grid.clone(), model, exec)?.with_source(Arc::new(m));
        run(
            &mut solver,
            &mut state,
            &RunConfig {
                t_final,
                record_every: usize::MAX,
                time_step: TimeStep::Adaptive,
            },
            &mut |_| Ok(()),
        )?;
        let err: Vec<f64> = (0..grid.cells())
            .map(|c| {
                (state.rho[c] - exact.rho[c]).abs()
                    + (state.mx[c] - exact.mx[c]).abs()
                    + (state.my[c] - exact.my[c]).abs()
            })
            .collect();
        errors.push(integrate(&err, &grid));
    }
    let pairs: Vec<(f64, f64)> = resolutions
        .iter()
        .zip(&errors)
        .map(|(n, e)| (1.0 / *n as f64, *e))
        .collect();
    let order = fit_order(&pairs)?.slope;
    Ok(SpatialStudy {
        resolutions: resolutions.to_vec(),
        errors,
        order,
    })
}

/// Inequality slack of one case at a fixed step and at half that step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackStudy {
    pub dt: f64,
    pub min_slack: [f64; 2],
    /// `max_t |slack(dt) - slack(dt / 2)|` at shared sample times.
    pub bound: f64,
    /// Relative change of the cumulative integrals when the sample cadence
    /// of the finer run is halved.
    pub cadence_change: f64,
}

impl SlackStudy {
    pub fn passes(&self, factor: f64) -> bool {
        self.min_slack.iter().all(|s| *s >= -factor * self.bound)
    }
}

/// Runs `spec` with a fixed step of `safety` times the initial stable step
/// (rounded so `t_final` is a whole number of steps) and with half of it.
pub fn slack_dt_study(spec: &CaseSpec, safety: f64, exec: Execution) -> Result<SlackStudy> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(invalid("safety", format!("{safety} must be in (0, 1]")));
    }
    let grid = spec.grid()?;
    let model = spec.model()?;
    let reference = super::case::make_reference(&spec.reference)?;
    let s0 = crate::solver::initialize(
        &crate::solver::InitSpec {
            delta: spec.delta,
            perturbation: spec.perturbation,
        },
        reference.as_ref(),
        &grid,
    )?;
    let dt_stable = crate::solver::stable_dt(&s0, &grid, &model, spec.cfl);
    let per = spec.record_every;
    let n = ((spec.t_final / (safety * dt_stable)).ceil() as usize).div_ceil(per) * per;
    let dt = spec.t_final / n as f64;
    let mut runs = Vec::with_capacity(2);
    for k in [1usize, 2] {
        let mut s = spec.clone();
        s.time_step = TimeStep::Fixed(dt / k as f64);
        s.record_every = per * k;
        let r = super::case::run_case(&s, exec, None)?;
        if let Some(f) = &r.failure {
            return Err(crate::error::Error::Internal(format!(
                "fixed-step run failed: {f}"
            )));
        }
        runs.push(r);
    }
    let slack: Vec<_> = runs
        .iter()
        .map(|r| inequality_residual(&r.records, spec.mode))
        .collect();
    let bound = slack[0]
        .slack
        .iter()
        .zip(&slack[1].slack)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let cadence_change = cadence_check(&runs[1].records, spec.eps)?.max_relative();
    Ok(SlackStudy {
        dt,
        min_slack: [slack[0].min_slack, slack[1].min_slack],
        bound,
        cadence_change,
    })
}
