//! Acceptance criteria 1-10, run in order with one status line each.
//! Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nslimit::diagnostics::Mode;
use nslimit::exec::Execution;
use nslimit::harness::suites::{
    corrector_suite, decomposition_suite, tensor_suite, thermo_suite, SuiteReport,
};
use nslimit::harness::{
    energy_dt_study, make_reference, run_case, run_sweep, slack_dt_study, CaseSpec, Config,
    SweepResult, Verdict,
};
use nslimit::solver::{initialize, stable_dt, InitSpec};

const EXEC: Execution = Execution::Parallel;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn suite_outcome(rep: &SuiteReport, limit: Duration, elapsed: Duration) -> Outcome {
    let failed: Vec<String> = rep
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    let fast = elapsed <= limit;
    let mut detail = format!("{} checks", rep.checks.len());
    if !failed.is_empty() {
        detail = format!("failed: {}", failed.join("; "));
    }
    if !fast {
        detail.push_str(&format!("; runtime over {} s", limit.as_secs()));
    }
    outcome(failed.is_empty() && fast, detail)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn criterion_1() -> Outcome {
    let (rep, el) = timed(|| thermo_suite(100_000, 0).expect("thermo suite"));
    suite_outcome(&rep, Duration::from_secs(5), el)
}

fn criterion_2() -> Outcome {
    let (rep, el) = timed(|| tensor_suite(100_000, 50, 0, EXEC).expect("tensor suite"));
    suite_outcome(&rep, Duration::from_secs(10), el)
}

fn criterion_3() -> Outcome {
    let ((rep, _), el) = timed(|| corrector_suite(EXEC).expect("corrector suite"));
    suite_outcome(&rep, Duration::from_secs(30), el)
}

fn criterion_4() -> Outcome {
    let (rep, el) = timed(|| decomposition_suite(100, 0).expect("decomposition suite"));
    suite_outcome(&rep, Duration::from_secs(10), el)
}

fn criterion_5() -> Outcome {
    let (res, el) = timed(|| {
        let mut cfg = Config::new(Mode::NoSlip);
        cfg.grid.nx = 32;
        cfg.grid.ny = 64;
        let spec = CaseSpec::from_config(&cfg, 1e-2);
        let grid = spec.grid().expect("grid");
        let model = spec.model().expect("model");
        let reference = make_reference(&spec.reference).expect("reference");
        let init = InitSpec {
            delta: spec.delta,
            perturbation: spec.perturbation,
        };
        let s0 = initialize(&init, reference.as_ref(), &grid).expect("initial state");
        let t_final = 0.1;
        let steps = ((t_final / (0.5 * stable_dt(&s0, &grid, &model, spec.cfl))).ceil() as usize)
            .div_ceil(10)
            * 10;
        energy_dt_study(
            &grid,
            model,
            &s0,
            t_final,
            t_final / steps as f64,
            steps / 10,
            EXEC,
        )
        .expect("dt study")
    });
    let finest = res.levels.last().expect("levels");
    let drift = res
        .levels
        .iter()
        .map(|l| l.max_mass_drift)
        .fold(0.0, f64::max);
    let ok = finest.steps >= 1000
        && drift <= 1e-12
        && res.order >= 1.0
        && res.slack_within_tolerance()
        && el <= Duration::from_secs(120);
    outcome(
        ok,
        format!(
            "mass drift {drift:.1e} over {} steps; tol {:.2e} -> {:.2e}, order {:.2}; min slack {:.2e}",
            finest.steps,
            res.differences[0],
            res.differences[1],
            res.order,
            res.levels.iter().map(|l| l.min_residual()).fold(f64::INFINITY, f64::min)
        ),
    )
}

fn criterion_6() -> Outcome {
    let (st, el) = timed(|| {
        let mut cfg = Config::new(Mode::Navier);
        cfg.sweep.eps_list = vec![1e-3];
        slack_dt_study(&CaseSpec::from_config(&cfg, 1e-3), 0.8, EXEC).expect("slack study")
    });
    let ok = st.passes(5.0) && st.cadence_change < 0.02 && el <= Duration::from_secs(300);
    outcome(
        ok,
        format!(
            "min slack {:.2e} / {:.2e} vs -5 x {:.2e}; cadence change {:.2e}",
            st.min_slack[0], st.min_slack[1], st.bound, st.cadence_change
        ),
    )
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criterion_7(sweep: &SweepResult, el: Duration) -> Outcome {
    let e: Vec<f64> = sweep.cases.iter().map(|c| c.sup_relative_energy).collect();
    let d: Vec<f64> = sweep
        .cases
        .iter()
        .map(|c| c.sup_density_gap_lgamma)
        .collect();
    let slope = sweep.slopes.relative_energy.map(|f| f.slope);
    let ok = sweep.all_ok()
        && strictly_decreasing(&e)
        && strictly_decreasing(&d)
        && slope.is_some_and(|s| s > 0.2)
        && el <= Duration::from_secs(1200);
    outcome(
        ok,
        format!(
            "sup E_rel {:.3e} -> {:.3e}, slope {:.3}; density gap {:.3e} -> {:.3e}",
            e[0],
            e[e.len() - 1],
            slope.unwrap_or(f64::NAN),
            d[0],
            d[d.len() - 1]
        ),
    )
}

fn criterion_8() -> Outcome {
    let (res, el) =
        timed(|| run_sweep(&Config::new(Mode::NoSlip), EXEC, None).expect("noslip sweep"));
    let kato_finite = res.cases.iter().all(|c| c.kato_functional_cum.is_finite());
    let verdict = res.verdict.as_ref().expect("noslip sweeps carry a verdict");
    let ok = res.all_ok()
        && kato_finite
        && verdict.verdict != Verdict::Inconsistent
        && el <= Duration::from_secs(1800);
    outcome(
        ok,
        format!(
            "verdict {:?} (Kato slope {:.3}, energy slope {:.3}); Kato finite at every eps: {kato_finite}",
            verdict.verdict,
            verdict.kato_slope.unwrap_or(f64::NAN),
            verdict.relative_energy_slope.unwrap_or(f64::NAN)
        ),
    )
}

fn criterion_9(sweep: &SweepResult) -> Outcome {
    let names = ["||rho||_Lgamma", "||rho u^2||_L1", "sqrt(eps)||grad u||_L2"];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let v: Vec<f64> = sweep
            .cases
            .iter()
            .map(|c| {
                [
                    c.apriori_rho_lgamma,
                    c.apriori_rho_u2_l1,
                    c.apriori_sqrt_eps_grad_u,
                ][k]
            })
            .collect();
        let max = v.iter().copied().fold(0.0, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let variation = max / min;
        let growth = max / v[0];
        ok &= variation < 2.0;
        parts.push(format!(
            "{name} max/min {variation:.2} (max/first {growth:.2})"
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut cfg = Config::new(Mode::Navier);
    cfg.grid.nx = 16;
    cfg.grid.ny = 64;
    cfg.sweep.eps_list = vec![2e-2, 1e-2];
    cfg.sweep.t_final = 0.05;
    let mut same = true;
    let mut files = 0;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        run_sweep(&cfg, Execution::Sequential, Some(&out)).expect("sweep");
        outputs.push(out);
    }
    for rel in [
        "sweep.csv",
        "sweep.json",
        "eps_00/diagnostics.csv",
        "eps_01/diagnostics.csv",
    ] {
        let a = std::fs::read(outputs[0].join(rel)).expect("output");
        let b = std::fs::read(outputs[1].join(rel)).expect("output");
        same &= a == b;
        files += 1;
    }
    let spec = CaseSpec::from_config(&cfg, 1e-2);
    let c1 = run_case(
        &spec,
        Execution::Sequential,
        Some(&dir.path().join("case0")),
    )
    .expect("case");
    let c2 = run_case(
        &spec,
        Execution::Sequential,
        Some(&dir.path().join("case1")),
    )
    .expect("case");
    let a = std::fs::read(dir.path().join("case0/diagnostics.csv")).expect("output");
    let b = std::fs::read(dir.path().join("case1/diagnostics.csv")).expect("output");
    same &= a == b && c1.ok() && c2.ok();
    files += 1;
    outcome(same, format!("{files} files compared byte for byte"))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |n: u32, o: Outcome| {
        println!(
            "criterion {n:>2}: {} - {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    let (navier, el) =
        timed(|| run_sweep(&Config::new(Mode::Navier), EXEC, None).expect("navier sweep"));
    report(7, criterion_7(&navier, el));
    report(8, criterion_8());
    report(9, criterion_9(&navier));
    report(10, criterion_10());
    let failed: Vec<u32> = results
        .iter()
        .filter(|(_, o)| !o.passed)
        .map(|(n, _)| *n)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
