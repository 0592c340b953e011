use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::case::{run_case, CaseSpec, CaseSummary};
use super::config::Config;
use super::fit::{fit_order, OrderFit};
use crate::diagnostics::Mode;
use crate::error::Result;
use crate::exec::{map_collect, Execution};

/// Fitted log-log slopes of the sup-in-time quantities against `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SweepSlopes {
    pub relative_energy: Option<OrderFit>,
    pub density_gap_lgamma: Option<OrderFit>,
    pub kinetic_gap: Option<OrderFit>,
    pub momentum_gap_l1: Option<OrderFit>,
    pub kato_functional: Option<OrderFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub crate_version: String,
    pub scheme: String,
    pub grid_rule: String,
}

impl SweepMetadata {
    fn current(cfg: &Config) -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            scheme: "SSP-RK2, MUSCL-minmod on (rho, u, v), Rusanov, central viscous fluxes".into(),
            grid_rule: match cfg.grid.stretch {
                Some(s) => format!("fixed tanh stretch {s}"),
                None => format!(
                    "tanh grading solved per eps: >= {} rows in the strip and wall cell <= c eps / {}",
                    cfg.grid.strip_cells, cfg.grid.strip_cells
                ),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: Config,
    pub mode: Mode,
    pub eps_list: Vec<f64>,
    pub cases: Vec<CaseSummary>,
    pub slopes: SweepSlopes,
    pub verdict: Option<VerdictRecord>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn all_ok(&self) -> bool {
        self.cases.iter().all(|c| c.status == "ok")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(
            File::open(path)?,
        ))?)
    }
}

fn slope(cases: &[CaseSummary], f: fn(&CaseSummary) -> f64) -> Option<OrderFit> {
    let pairs: Vec<(f64, f64)> = cases
        .iter()
        .filter(|c| c.status == "ok")
        .map(|c| (c.eps, f(c)))
        .collect();
    fit_order(&pairs).ok()
}

pub fn sweep_slopes(cases: &[CaseSummary]) -> SweepSlopes {
    SweepSlopes {
        relative_energy: slope(cases, |c| c.sup_relative_energy),
        density_gap_lgamma: slope(cases, |c| c.sup_density_gap_lgamma),
        kinetic_gap: slope(cases, |c| c.sup_kinetic_gap),
        momentum_gap_l1: slope(cases, |c| c.sup_momentum_gap_l1),
        kato_functional: slope(cases, |c| c.kato_functional_cum),
    }
}

/// Runs every `eps` of the configuration (concurrently under
/// `Execution::Parallel`), assembles the results in list order and, when
/// `out` is given, writes `sweep.csv`, `sweep.json` and one
/// `eps_NN/diagnostics.csv` per case.
pub fn run_sweep(cfg: &Config, exec: Execution, out: Option<&Path>) -> Result<SweepResult> {
    cfg.validate()?;
    let specs: Vec<CaseSpec> = cfg
        .sweep
        .eps_list
        .iter()
        .map(|e| CaseSpec::from_config(cfg, *e))
        .collect();
    // grids are checked up front so an unresolved strip fails before any run
    for s in &specs {
        s.grid()?;
        s.model()?;
    }
    let results = map_collect(exec, specs.len(), |k| {
        let dir = out.map(|d| d.join(format!("eps_{k:02}")));
        run_case(&specs[k], exec, dir.as_deref())
    });
    let mut cases = Vec::with_capacity(specs.len());
    for r in results {
        cases.push(r?.case_summary());
    }
    let slopes = sweep_slopes(&cases);
    let mut result = SweepResult {
        config: cfg.clone(),
        mode: cfg.sweep.mode,
        eps_list: cfg.sweep.eps_list.clone(),
        cases,
        slopes,
        verdict: None,
        metadata: SweepMetadata::current(cfg),
    };
    if result.mode == Mode::NoSlip {
        result.verdict = Some(check_conditional(&result, &Thresholds::default()));
    }
    if let Some(dir) = out {
        write_sweep(&result, dir)?;
    }
    Ok(result)
}

pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("sweep.csv"))?));
    for c in &result.cases {
        w.serialize(c)?;
    }
    w.flush()?;
    let f = BufWriter::new(File::create(dir.join("sweep.json"))?);
    serde_json::to_writer_pretty(f, result)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    HypothesisUnmet,
    Inconsistent,
    /// Too few successful cases to fit a slope.
    Undetermined,
}

impl Verdict {
    pub fn message(&self) -> &'static str {
        match self {
            Self::Consistent => "consistent with the Kato criterion",
            Self::HypothesisUnmet => "hypothesis unmet - no claim",
            Self::Inconsistent => "INCONSISTENT - investigate discretization",
            Self::Undetermined => "undetermined - too few successful cases",
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Consistent => 0,
            Self::HypothesisUnmet => 2,
            Self::Inconsistent => 3,
            Self::Undetermined => 1,
        }
    }
}

/// Slope thresholds of the conditional check. A Kato slope at or below
/// `kato_min_slope` counts as "not vanishing".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub kato_min_slope: f64,
    pub energy_min_slope: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            kato_min_slope: 0.1,
            energy_min_slope: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    pub kato_slope: Option<f64>,
    pub relative_energy_slope: Option<f64>,
    pub thresholds: Thresholds,
    pub message: String,
}

/// Kato vanishing implies convergence; the converse is never asserted.
pub fn check_conditional(result: &SweepResult, th: &Thresholds) -> VerdictRecord {
    let ks = result.slopes.kato_functional.map(|f| f.slope);
    let es = result.slopes.relative_energy.map(|f| f.slope);
    let verdict = match (ks, es) {
        (Some(k), _) if k <= th.kato_min_slope => Verdict::HypothesisUnmet,
        (Some(_), Some(e)) if e > th.energy_min_slope => Verdict::Consistent,
        (Some(_), Some(_)) => Verdict::Inconsistent,
        _ => Verdict::Undetermined,
    };
    VerdictRecord {
        verdict,
        kato_slope: ks,
        relative_energy_slope: es,
        thresholds: *th,
        message: verdict.message().into(),
    }
}

/// Plain-text table of a sweep.
pub fn render_report(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "sweep: mode {}, reference {}, cutoff {}, gamma {}, c {}, T {}",
        result.mode.name(),
        result.config.reference.name,
        result.config.reference.cutoff.name(),
        result.config.gas.gamma,
        result.config.grid.c,
        result.config.sweep.t_final
    );
    let _ = writeln!(
        s,
        "grid: {}x{}, {}",
        result.config.grid.nx, result.config.grid.ny, result.metadata.grid_rule
    );
    let _ = writeln!(
        s,
        "{:>10} {:>10} {:>10} {:>7} {:>12} {:>12} {:>12} {:>12} {:>12} {:>11}  status",
        "eps",
        "beta",
        "delta",
        "steps",
        "sup E_rel",
        "sup |r-rE|",
        "sup kin",
        "kato",
        "min slack",
        "mass drift"
    );
    for c in &result.cases {
        let _ = writeln!(
            s,
            "{:>10.3e} {:>10.3e} {:>10.3e} {:>7} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>11.2e}  {}",
            c.eps,
            c.beta,
            c.delta,
            c.steps,
            c.sup_relative_energy,
            c.sup_density_gap_lgamma,
            c.sup_kinetic_gap,
            c.kato_functional_cum,
            c.min_inequality_residual,
            c.max_mass_drift,
            c.status
        );
    }
    let fmt = |f: &Option<OrderFit>| match f {
        Some(f) => format!("{:+.3} (+/- {:.3})", f.slope, f.width),
        None => "n/a".into(),
    };
    let sl = &result.slopes;
    let _ = writeln!(s, "slopes vs eps:");
    let _ = writeln!(s, "  sup relative energy   {}", fmt(&sl.relative_energy));
    let _ = writeln!(s, "  sup density gap       {}", fmt(&sl.density_gap_lgamma));
    let _ = writeln!(s, "  sup kinetic gap       {}", fmt(&sl.kinetic_gap));
    let _ = writeln!(s, "  sup momentum gap      {}", fmt(&sl.momentum_gap_l1));
    let _ = writeln!(s, "  Kato functional       {}", fmt(&sl.kato_functional));
    if let Some(v) = &result.verdict {
        let _ = writeln!(s, "verdict: {}", v.message);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result_with(kato: Option<f64>, energy: Option<f64>) -> SweepResult {
        let fit = |s: f64| OrderFit {
            slope: s,
            intercept: 0.0,
            width: 0.0,
            used: 5,
            dropped: 0,
        };
        let cfg = Config::new(Mode::NoSlip);
        SweepResult {
            mode: Mode::NoSlip,
            eps_list: cfg.sweep.eps_list.clone(),
            metadata: SweepMetadata::current(&cfg),
            config: cfg,
            cases: vec![],
            slopes: SweepSlopes {
                kato_functional: kato.map(fit),
                relative_energy: energy.map(fit),
                ..Default::default()
            },
            verdict: None,
        }
    }

    #[test]
    fn conditional_logic() {
        let th = Thresholds::default();
        let v = |k, e| check_conditional(&result_with(k, e), &th).verdict;
        assert_eq!(v(Some(0.8), Some(0.6)), Verdict::Consistent);
        assert_eq!(v(Some(0.0), Some(0.6)), Verdict::HypothesisUnmet);
        assert_eq!(v(Some(0.05), Some(-1.0)), Verdict::HypothesisUnmet);
        assert_eq!(v(Some(-0.5), Some(-1.0)), Verdict::HypothesisUnmet);
        assert_eq!(v(Some(0.8), Some(0.0)), Verdict::Inconsistent);
        assert_eq!(v(Some(0.8), Some(-0.3)), Verdict::Inconsistent);
        assert_eq!(v(None, Some(0.3)), Verdict::Undetermined);
        assert_eq!(Verdict::HypothesisUnmet.exit_code(), 2);
        assert_eq!(Verdict::Inconsistent.exit_code(), 3);
    }
}
