use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::Config;
use crate::diagnostics::{
    accumulate, apriori_norms, cadence_check, gronwall_check, inequality_residual,
    write_records_csv, DiagnosticsRecord, Evaluator, Mode, DEFAULT_GRONWALL_CAP,
};
use crate::domain::{resolve_strip, ChannelGrid};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::layer::CutoffProfile;
use crate::reference::{shear_flow, EulerReference, Profile};
use crate::solver::snapshot::{SnapshotHeader, SnapshotWriter};
use crate::solver::{
    initialize, run, BoundaryCondition, InitSpec, Model, Perturbation, RunConfig, RunSummary,
    Solver, TimeStep,
};
use crate::tensor::ViscosityParams;
use crate::thermo::GasLaw;

/// One solver run with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub mode: Mode,
    pub eps: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub eta: f64,
    pub c: f64,
    pub t_final: f64,
    pub length_x: f64,
    pub nx: usize,
    pub ny: usize,
    pub stretch: Option<f64>,
    pub strip_cells: usize,
    pub reference: String,
    pub cutoff: CutoffProfile,
    pub perturbation: Perturbation,
    pub record_every: usize,
    pub cfl: f64,
    pub time_step: TimeStep,
    pub seed: u64,
    pub snapshot_every: usize,
}

impl CaseSpec {
    pub fn from_config(cfg: &Config, eps: f64) -> Self {
        let s = &cfg.sweep;
        Self {
            mode: s.mode,
            eps,
            beta: match s.mode {
                Mode::Navier => s.beta.eval(eps),
                Mode::NoSlip => 0.0,
            },
            delta: s.delta.eval(eps),
            gamma: cfg.gas.gamma,
            mu: cfg.viscosity.mu,
            eta: cfg.viscosity.eta,
            c: cfg.grid.c,
            t_final: s.t_final,
            length_x: cfg.grid.length_x,
            nx: cfg.grid.nx,
            ny: cfg.grid.ny,
            stretch: cfg.grid.stretch,
            strip_cells: cfg.grid.strip_cells,
            reference: cfg.reference.name.clone(),
            cutoff: cfg.reference.cutoff,
            perturbation: cfg.reference.perturbation,
            record_every: s.record_every,
            cfl: s.cfl,
            time_step: TimeStep::Adaptive,
            seed: s.seed,
            snapshot_every: cfg.output.snapshot_every,
        }
    }

    /// The grid of this case: fixed stretch if given, otherwise the
    /// resolution rule for the strip `c eps`.
    pub fn grid(&self) -> Result<ChannelGrid> {
        let width = self.c * self.eps;
        let g = match self.stretch {
            Some(s) => ChannelGrid::build(self.length_x, self.nx, self.ny, s)?,
            None => resolve_strip(self.length_x, self.nx, self.ny, width, self.strip_cells)?,
        };
        g.check_resolves(width, self.strip_cells)?;
        Ok(g)
    }

    pub fn model(&self) -> Result<Model> {
        let law = GasLaw::new(self.gamma)?;
        let bc = match self.mode {
            Mode::NoSlip => BoundaryCondition::no_slip(),
            Mode::Navier => BoundaryCondition::navier(self.beta)?,
        };
        let visc = ViscosityParams::new(self.mu, self.eta, self.eps, bc.beta)?;
        Model::new(law, visc, bc)
    }
}

/// Shear-flow reference by name: `plug`, `rest`, `sine`, `tanh`.
pub fn make_reference(name: &str) -> Result<Box<dyn EulerReference>> {
    Ok(Box::new(shear_flow(Profile::from_name(name)?)))
}

/// Per-case scalars reported by a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub eps: f64,
    pub beta: f64,
    pub delta: f64,
    pub stretch: f64,
    pub wall_height: f64,
    pub steps: usize,
    pub min_dt: f64,
    pub initial_relative_energy: f64,
    pub sup_relative_energy: f64,
    pub sup_density_gap_lgamma: f64,
    pub sup_kinetic_gap: f64,
    pub sup_momentum_gap_l1: f64,
    pub kato_functional_cum: f64,
    pub min_inequality_residual: f64,
    pub energy_residual: f64,
    pub energy_excess: f64,
    pub max_mass_drift: f64,
    pub apriori_rho_lgamma: f64,
    pub apriori_rho_u2_l1: f64,
    pub apriori_sqrt_eps_grad_u: f64,
    pub gronwall_c: f64,
    pub gronwall_offset_l1: f64,
    pub max_identity_gap: f64,
    pub cadence_change: f64,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub spec: CaseSpec,
    pub grid: ChannelGrid,
    pub records: Vec<DiagnosticsRecord>,
    pub summary: Option<RunSummary>,
    pub failure: Option<String>,
    pub elapsed: std::time::Duration,
}

impl CaseResult {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn case_summary(&self) -> CaseSummary {
        let r = &self.records;
        let sup = |f: fn(&DiagnosticsRecord) -> f64| r.iter().map(f).fold(0.0_f64, f64::max);
        let ap = apriori_norms(r);
        let gw = gronwall_check(r, DEFAULT_GRONWALL_CAP).ok();
        let last = r.last().copied().unwrap_or_default();
        CaseSummary {
            eps: self.spec.eps,
            beta: self.spec.beta,
            delta: self.spec.delta,
            stretch: self.grid.stretch_ratio(),
            wall_height: self.grid.wall_height(),
            steps: self.summary.map_or(last.step, |s| s.steps),
            min_dt: self.summary.map_or(f64::NAN, |s| s.min_dt),
            initial_relative_energy: r.first().map_or(f64::NAN, |x| x.relative_energy_vs_euler),
            sup_relative_energy: sup(|x| x.relative_energy_vs_euler),
            sup_density_gap_lgamma: sup(|x| x.density_gap_lgamma),
            sup_kinetic_gap: sup(|x| x.kinetic_gap),
            sup_momentum_gap_l1: sup(|x| x.momentum_gap_l1),
            kato_functional_cum: last.kato_functional_cum,
            min_inequality_residual: inequality_residual(r, self.spec.mode).min_slack,
            energy_residual: last.ledger_residual,
            energy_excess: last.ledger_excess,
            max_mass_drift: self.summary.map_or(f64::NAN, |s| s.max_mass_drift),
            apriori_rho_lgamma: ap[0],
            apriori_rho_u2_l1: ap[1],
            apriori_sqrt_eps_grad_u: ap[2],
            gronwall_c: gw.as_ref().map_or(f64::NAN, |g| g.c),
            gronwall_offset_l1: gw.as_ref().map_or(f64::NAN, |g| g.offset_l1),
            max_identity_gap: sup(|x| x.identity_gap.abs()),
            cadence_change: cadence_check(r, self.spec.eps).map_or(f64::NAN, |c| c.max_relative()),
            status: match &self.failure {
                None => "ok".into(),
                Some(m) => format!("failed: {m}"),
            },
        }
    }
}

/// Runs one case. Solver aborts are reported in `failure` with the records
/// gathered so far; configuration errors are returned as `Err`. When `out`
/// is given, `diagnostics.csv` (and snapshots, if requested) go there.
pub fn run_case(spec: &CaseSpec, exec: Execution, out: Option<&Path>) -> Result<CaseResult> {
    if spec.record_every == 0 {
        return Err(invalid("record_every", "must be >= 1"));
    }
    let grid = spec.grid()?;
    let model = spec.model()?;
    let reference = make_reference(&spec.reference)?;
    let state0 = initialize(
        &InitSpec {
            delta: spec.delta,
            perturbation: spec.perturbation,
        },
        reference.as_ref(),
        &grid,
    )?;
    let evaluator = Evaluator::new(&grid, model, reference.as_ref(), spec.c, spec.cutoff)?;
    let mut solver = Solver::new(grid.clone(), model, exec)?.with_cfl(spec.cfl)?;
    let mut snapshots = match (out, spec.snapshot_every) {
        (Some(dir), k) if k > 0 => Some(SnapshotWriter::new(
            &dir.join("snapshots"),
            SnapshotHeader {
                nx: grid.nx() as u32,
                ny: grid.ny() as u32,
                length_x: grid.length_x(),
                gamma: spec.gamma,
                eps: spec.eps,
                beta: spec.beta,
                time: 0.0,
            },
        )?),
        _ => None,
    };
    let mut records = Vec::new();
    let mut state = state0;
    let cfg = RunConfig {
        t_final: spec.t_final,
        record_every: spec.record_every,
        time_step: spec.time_step,
    };
    let start = Instant::now();
    let outcome = run(&mut solver, &mut state, &cfg, &mut |s| {
        let rec = evaluator.evaluate(s.step, s.time, s.dt, s.state, Some(s.ledger))?;
        if let Some(w) = snapshots.as_mut() {
            if records.len() % spec.snapshot_every == 0 {
                w.write(s.step, s.time, s.state)?;
            }
        }
        records.push(rec);
        Ok(())
    });
    let elapsed = start.elapsed();
    accumulate(&mut records, spec.eps);
    let (summary, failure) = match outcome {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let f = File::create(dir.join("diagnostics.csv"))?;
        write_records_csv(&records, BufWriter::new(f))?;
    }
    Ok(CaseResult {
        spec: spec.clone(),
        grid,
        records,
        summary,
        failure,
        elapsed,
    })
}
