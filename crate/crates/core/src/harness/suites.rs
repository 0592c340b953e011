//! Property suites shared by the command line and the acceptance tests.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::remainder_noslip;
use crate::domain::{resolve_strip, ChannelGrid, VectorField};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::layer::{build_corrector, corrector_at, verify_scalings, CutoffProfile, ScalingRow};
use crate::reference::{sample, shear_flow, DensityPerturbed, EulerReference, Profile};
use crate::solver::{velocity_gradient, BoundaryCondition, FluidField, Model};
use crate::tensor::{
    estimate_coercivity, stress, stress_contraction, Tensor, ViscosityParams, WallModeSampler,
};
use crate::thermo::{fit_sandwich_constants, relative_entropy, Compact, GasLaw};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
    pub elapsed_s: f64,
}

impl SuiteReport {
    fn new(suite: &'static str) -> Self {
        Self {
            suite,
            checks: Vec::new(),
            elapsed_s: 0.0,
        }
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "[{tag}] {}: {}", c.name, c.detail);
        }
        let _ = writeln!(
            s,
            "{}: {}/{} checks passed in {:.2} s",
            self.suite,
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len(),
            self.elapsed_s
        );
        s
    }
}

const THERMO_GAMMAS: [f64; 4] = [1.4, 5.0 / 3.0, 2.0, 3.0];

/// Nonnegativity and the zero set of `H(rho|r)`, the `gamma = 2` closed form
/// and the sandwich constants on `K = [1/2, 2]`.
pub fn thermo_suite(samples: usize, seed: u64) -> Result<SuiteReport> {
    if samples == 0 {
        return Err(invalid("samples", "must be >= 1"));
    }
    let start = Instant::now();
    let mut rep = SuiteReport::new("thermo");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut negative, mut zero_off_diag, mut max_diag) = (0usize, 0usize, 0.0_f64);
    for k in 0..samples {
        let law = GasLaw::new(THERMO_GAMMAS[k % THERMO_GAMMAS.len()])?;
        let r = rng.gen_range(0.1..5.0);
        let rho = rng.gen_range(0.0..5.0);
        let h = relative_entropy(rho, r, law)?;
        if h < 0.0 {
            negative += 1;
        }
        if h == 0.0 && rho != r {
            zero_off_diag += 1;
        }
        max_diag = max_diag.max(relative_entropy(r, r, law)?.abs());
    }
    rep.push(
        "relative entropy >= 0",
        negative == 0,
        format!("{negative} negative of {samples} samples"),
    );
    rep.push(
        "zero iff rho = r",
        zero_off_diag == 0 && max_diag <= 1e-12,
        format!("max |H(r|r)| = {max_diag:.2e}, {zero_off_diag} zeros off the diagonal"),
    );

    let law2 = GasLaw::new(2.0)?;
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let r = rng.gen_range(0.1..5.0);
        let rho = rng.gen_range(0.0..5.0);
        let want = (rho - r) * (rho - r);
        let err = (relative_entropy(rho, r, law2)? - want).abs() / want.max(1.0);
        worst = worst.max(err);
    }
    rep.push(
        "gamma = 2 closed form (rho - r)^2",
        worst <= 1e-12,
        format!("max scaled error {worst:.2e}"),
    );

    let compact = Compact::new(0.5, 2.0)?;
    for gamma in [5.0 / 3.0, 2.0] {
        let sc = fit_sandwich_constants(
            GasLaw::new(gamma)?,
            compact,
            crate::thermo::DEFAULT_SANDWICH_SAMPLES,
        )?;
        rep.push(
            format!("sandwich constants gamma = {gamma:.4}"),
            sc.c1 > 0.0 && sc.c2.is_finite(),
            format!("c1 = {:.4e}, c2 = {:.4e} on [0.5, 2]", sc.c1, sc.c2),
        );
    }
    rep.elapsed_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

fn random_tensor<const D: usize>(rng: &mut ChaCha8Rng) -> Tensor<D> {
    let mut m = [[0.0; D]; D];
    m.iter_mut()
        .flatten()
        .for_each(|v| *v = rng.gen_range(-10.0..10.0));
    Tensor(m)
}

fn contraction_checks<const D: usize>(
    rep: &mut SuiteReport,
    rng: &mut ChaCha8Rng,
    samples: usize,
) -> Result<()> {
    let (mut negative, mut worst) = (0usize, 0.0_f64);
    for _ in 0..samples {
        let visc = ViscosityParams::new(
            rng.gen_range(0.01..10.0),
            rng.gen_range(0.0..10.0),
            1.0,
            0.0,
        )?;
        let g = random_tensor::<D>(rng);
        let s = stress_contraction(&g, &visc);
        if s < 0.0 {
            negative += 1;
        }
        let pairing = stress(&g, &visc).dot(&g);
        let scale = visc.mu.max(visc.eta) * g.norm_sq();
        worst = worst.max((s - pairing).abs() / scale.max(f64::MIN_POSITIVE));
    }
    rep.push(
        format!("S(G):G >= 0 in {D}D"),
        negative == 0,
        format!("{negative} negative of {samples} random (G, mu, eta)"),
    );
    rep.push(
        format!("contraction equals Frobenius pairing in {D}D"),
        worst <= 1e-12,
        format!("max relative gap {worst:.2e}"),
    );
    Ok(())
}

/// Stress positivity, the Frobenius identity and the measured discrete
/// coercivity constant on a `32 x 32` grid.
pub fn tensor_suite(
    samples: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<SuiteReport> {
    if samples == 0 {
        return Err(invalid("samples", "must be >= 1"));
    }
    let start = Instant::now();
    let mut rep = SuiteReport::new("tensor");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    contraction_checks::<2>(&mut rep, &mut rng, samples)?;
    contraction_checks::<3>(&mut rep, &mut rng, samples)?;
    let grid = ChannelGrid::uniform(1.0, 32, 32)?;
    for (mu, eta) in [(1.0, 0.0), (1.0, 1.0), (0.1, 0.0)] {
        let visc = ViscosityParams::new(mu, eta, 1.0, 0.0)?;
        let est = estimate_coercivity(
            &WallModeSampler::default(),
            &grid,
            &visc,
            trials,
            seed,
            exec,
        )?;
        rep.push(
            format!("coercivity mu = {mu}, eta = {eta}"),
            est.c0 > 0.0,
            format!("C0 = {:.4e} over {} trials", est.c0, est.ratios.len()),
        );
    }
    rep.elapsed_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Five-point Gauss-Legendre on `[a, b]` split into `pieces` panels.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            X.iter()
                .zip(W)
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

pub const CORRECTOR_EPS_EXPONENTS: std::ops::RangeInclusive<i32> = 6..=12;
pub const CORRECTOR_P: [f64; 3] = [1.0, 2.0, 4.0];
pub const CORRECTOR_SLOPE_TOL: f64 = 0.1;

/// Corrector norm scalings for `plug` and `sine` with both cutoffs, and the
/// plug-flow `L^2` closed form against quadrature.
pub fn corrector_suite(exec: Execution) -> Result<(SuiteReport, Vec<ScalingRow>)> {
    let start = Instant::now();
    let mut rep = SuiteReport::new("corrector");
    let eps: Vec<f64> = CORRECTOR_EPS_EXPONENTS.map(|k| 2f64.powi(-k)).collect();
    let c = 1.0;
    let grid_for = |e: f64| resolve_strip(1.0, 4, 256, c * e, 16);
    let mut all = Vec::new();
    for name in ["plug", "sine"] {
        let r = shear_flow(Profile::from_name(name)?);
        for cut in [CutoffProfile::Quintic, CutoffProfile::Cosine] {
            let rows = verify_scalings(&r, &grid_for, c, &eps, cut, &CORRECTOR_P, 0.0, exec)?;
            let fitted: Vec<&ScalingRow> = rows.iter().filter(|r| !r.skipped()).collect();
            let bad: Vec<String> = fitted
                .iter()
                .filter(|r| !r.within(CORRECTOR_SLOPE_TOL))
                .map(|r| format!("{} p={} slope {:?}", r.quantity.name(), r.p, r.slope))
                .collect();
            let worst = fitted
                .iter()
                .filter_map(|r| r.slope.map(|s| (s - r.expected).abs()))
                .fold(0.0, f64::max);
            rep.push(
                format!("scalings {name}/{}", cut.name()),
                bad.is_empty() && !fitted.is_empty(),
                if bad.is_empty() {
                    format!(
                        "{} fitted rows, max |slope - expected| = {worst:.3}",
                        fitted.len()
                    )
                } else {
                    format!("off: {}", bad.join("; "))
                },
            );
            all.extend(rows);
        }
    }
    let plug = shear_flow(Profile::from_name("plug")?);
    let u0 = Profile::from_name("plug")?.value(0.0);
    for cut in [CutoffProfile::Quintic, CutoffProfile::Cosine] {
        let mut worst = 0.0_f64;
        for &e in &eps {
            let w = c * e;
            let closed = 2.0 * u0 * u0 * w * cut.xi_sq_integral();
            let f = |y: f64| {
                let p = corrector_at(&plug, c, e, cut, 0.0, 0.0, y);
                p.v_f[0] * p.v_f[0] + p.v_f[1] * p.v_f[1]
            };
            let quad = gauss_legendre(f, 0.0, w, 64) + gauss_legendre(f, 1.0 - w, 1.0, 64);
            worst = worst.max((quad - closed).abs() / closed);
        }
        rep.push(
            format!("plug L2 closed form/{}", cut.name()),
            worst <= 1e-6,
            format!("max relative gap {worst:.2e}"),
        );
    }
    rep.elapsed_s = start.elapsed().as_secs_f64();
    Ok((rep, all))
}

fn random_state(g: &ChannelGrid, rng: &mut ChaCha8Rng) -> FluidField {
    let rho: Vec<f64> = (0..g.cells()).map(|_| rng.gen_range(0.3..2.0)).collect();
    let u = VectorField {
        x: (0..g.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        y: (0..g.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    FluidField::from_primitive(rho, &u)
}

/// The direct remainder against the sum of its six terms on random states,
/// and the identical-arguments case.
pub fn decomposition_suite(states: usize, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rep = SuiteReport::new("decomposition");
    let g = ChannelGrid::uniform(1.0, 8, 8)?;
    let law = GasLaw::new(1.4)?;
    let visc = ViscosityParams::new(1.0, 0.5, 0.05, 0.0)?;
    let model = Model::new(law, visc, BoundaryCondition::no_slip())?;
    let base = shear_flow(Profile::from_name("sine")?);
    let perturbed = DensityPerturbed {
        base,
        amplitude: 0.3,
        length_x: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (label, r) in [
        ("shear", &base as &dyn EulerReference),
        ("perturbed density", &perturbed),
    ] {
        let sr = sample(r, &g, 0.0);
        let cor = build_corrector(r, &g, 2.0, 0.1, CutoffProfile::Quintic, 0.0)?;
        let mut worst = 0.0_f64;
        for _ in 0..states {
            let s = random_state(&g, &mut rng);
            let grad = velocity_gradient(&s, &g, &model);
            let rem = remainder_noslip(&s, &grad, &sr, Some(&cor), &g, &visc, law);
            worst = worst.max(rem.identity_gap().abs() / rem.scale());
        }
        rep.push(
            format!("direct = R1 + ... + R6 ({label} reference)"),
            worst <= 1e-10,
            format!("max relative gap {worst:.2e} over {states} states"),
        );
    }
    let sr = sample(&base, &g, 0.0);
    let s = FluidField::from_primitive(sr.density.clone(), &sr.velocity);
    let rem = remainder_noslip(&s, &sr.velocity_grad, &sr, None, &g, &visc, law);
    let want: f64 = (0..g.cells())
        .map(|c| {
            g.cell_volume(c)
                * visc.eps
                * stress(&sr.velocity_grad[c], &visc).dot(&sr.velocity_grad[c])
        })
        .sum();
    let gap = (rem.direct - want).abs() / want;
    rep.push(
        "identical arguments leave eps S(grad uE):grad uE",
        gap <= 1e-14 && rem.r1 == 0.0 && rem.r4 == 0.0 && rem.r5 == 0.0 && rem.r6 == 0.0,
        format!("relative gap {gap:.2e}"),
    );
    rep.elapsed_s = start.elapsed().as_secs_f64();
    Ok(rep)
}
