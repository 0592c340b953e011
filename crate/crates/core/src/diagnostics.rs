//! Functionals evaluated along a trajectory: relative energies, the Kato
//! strip functional, the remainder terms of the relative energy inequality
//! and the a-priori norms.
//!
//! Per-sample values come from [`Evaluator::evaluate`]; time integrals are
//! filled in afterwards by [`accumulate`], which runs in time order.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{integrate, lp_norm, strip_mask, ChannelGrid, StripMask, VectorField};
use crate::error::{invalid, Error, Result};
use crate::layer::{build_corrector, Corrector, CutoffProfile};
use crate::reference::{sample, EulerReference, SampledReference};
use crate::solver::{
    velocity_gradient, wall_trace, BcKind, EnergyLedger, FluidField, Model, WallTrace,
};
use crate::tensor::{stress, Tensor2, ViscosityParams};
use crate::thermo::GasLaw;

/// Which relative energy inequality a run is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "noslip")]
    NoSlip,
    #[serde(rename = "navier")]
    Navier,
}

impl Mode {
    pub fn of(model: &Model) -> Self {
        match model.bc.kind {
            BcKind::NoSlip => Self::NoSlip,
            BcKind::Navier => Self::Navier,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::NoSlip => "noslip",
            Self::Navier => "navier",
        }
    }
}

/// `int 1/2 rho |u - U|^2 + H(rho | r)`.
pub fn relative_energy(
    state: &FluidField,
    r: &[f64],
    test_u: &VectorField,
    grid: &ChannelGrid,
    law: GasLaw,
) -> Result<f64> {
    if let Some(k) = r.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "test density {} <= 0 at cell {k}",
            r[k]
        )));
    }
    let dens: Vec<f64> = (0..grid.cells())
        .map(|c| {
            let [u, v] = state.velocity_at(c);
            let (du, dv) = (u - test_u.x[c], v - test_u.y[c]);
            0.5 * state.rho[c] * (du * du + dv * dv) + law.rel_h(state.rho[c], r[c])
        })
        .collect();
    Ok(integrate(&dens, grid))
}

/// `int_{row cap strip} d^-2 dy` for every row. The wall rows, where the
/// integral diverges, use the overlap length times `d^-2` at the center.
pub fn kato_row_weights(grid: &ChannelGrid, mask: &StripMask) -> Vec<f64> {
    let w = mask.width();
    let f = grid.y_faces();
    // d runs over [lo, hi] on one side of the midline
    let seg = |lo: f64, hi: f64, dc: f64| -> f64 {
        let hi = hi.min(w);
        if lo >= hi {
            0.0
        } else if lo <= 0.0 {
            hi / (dc * dc)
        } else {
            1.0 / lo - 1.0 / hi
        }
    };
    (0..grid.ny())
        .map(|j| {
            let (a, b) = (f[j], f[j + 1]);
            let dc = grid.row_distance(j);
            let mut s = 0.0;
            if a < 0.5 {
                s += seg(a, b.min(0.5), dc);
            }
            if b > 0.5 {
                s += seg(1.0 - b, 1.0 - a.max(0.5), dc);
            }
            s
        })
        .collect()
}

/// `eps int_strip rho |u|^2 / d^2 + rho^2 (u.n)^2 / d^2 + |grad u|^2`.
pub fn kato_rate(
    state: &FluidField,
    grad_u: &[Tensor2],
    grid: &ChannelGrid,
    mask: &StripMask,
    weights: &[f64],
) -> f64 {
    let nx = grid.nx();
    let dx = grid.dx();
    let mut s = 0.0;
    for j in 0..grid.ny() {
        let rw = mask.row_weight(j);
        if rw == 0.0 && weights[j] == 0.0 {
            continue;
        }
        let (mut a, mut g) = (0.0, 0.0);
        for c in j * nx..(j + 1) * nx {
            let rho = state.rho[c];
            let [u, v] = state.velocity_at(c);
            a += rho * (u * u + v * v) + rho * rho * v * v;
            g += grad_u[c].norm_sq();
        }
        s += dx * (a * weights[j] + g * grid.heights()[j] * rw);
    }
    mask.eps * s
}

/// Rate series and trapezoid time integral of the Kato functional over
/// `(time, state)` samples.
pub fn kato_functional(
    trajectory: &[(f64, &FluidField)],
    grid: &ChannelGrid,
    model: &Model,
    mask: &StripMask,
) -> (Vec<f64>, f64) {
    let w = kato_row_weights(grid, mask);
    let rates: Vec<f64> = trajectory
        .iter()
        .map(|(_, s)| kato_rate(s, &velocity_gradient(s, grid, model), grid, mask, &w))
        .collect();
    let cum = trajectory
        .windows(2)
        .zip(rates.windows(2))
        .map(|(t, r)| 0.5 * (t[1].0 - t[0].0) * (r[0] + r[1]))
        .sum();
    (rates, cum)
}

/// The test pair `(r, U)` and its derivatives at cell centers.
struct TestPair<'a> {
    r: &'a SampledReference,
    v_f: Option<&'a Corrector>,
}

impl TestPair<'_> {
    fn u(&self, c: usize) -> [f64; 2] {
        let e = self.r.velocity.at(c);
        match self.v_f {
            Some(k) => [e[0] - k.v_f.x[c], e[1] - k.v_f.y[c]],
            None => e,
        }
    }
    fn grad(&self, c: usize) -> Tensor2 {
        match self.v_f {
            Some(k) => self.r.velocity_grad[c] - k.grad_v_f[c],
            None => self.r.velocity_grad[c],
        }
    }
    fn dt(&self, c: usize) -> [f64; 2] {
        let e = self.r.velocity_dt.at(c);
        match self.v_f {
            Some(k) => [e[0] - k.dt_v_f.x[c], e[1] - k.dt_v_f.y[c]],
            None => e,
        }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Per-cell terms shared by both decompositions.
struct CellTerms {
    /// Integrand of the interior part of the direct remainder.
    direct: f64,
    /// `rho M . (U - u) + (r - rho) Q` with `M`, `Q` the residuals of the two
    /// recast Euler identities.
    recast: f64,
}

fn cell_terms(
    law: GasLaw,
    visc: &ViscosityParams,
    pair: &TestPair<'_>,
    rho: f64,
    u: [f64; 2],
    grad_u: &Tensor2,
    c: usize,
) -> CellTerms {
    let re = pair.r;
    let r = re.density[c];
    let h2 = law.second_derivative_h(r);
    let gr = re.density_grad[c];
    let dt_hp = h2 * re.density_dt[c];
    let grad_hp = [h2 * gr[0], h2 * gr[1]];
    let big_u = pair.u(c);
    let gu = pair.grad(c);
    let adv = gu.apply(u);
    let dtu = pair.dt(c);
    let diff = sub(big_u, u);
    let direct = rho * dot([dtu[0] + adv[0], dtu[1] + adv[1]], diff)
        + visc.eps * stress(grad_u, visc).dot(&gu)
        + (r - rho) * dt_hp
        + dot(
            grad_hp,
            [r * big_u[0] - rho * u[0], r * big_u[1] - rho * u[1]],
        )
        - gu.trace() * (law.p(rho) - law.p(r));
    let ue = re.velocity.at(c);
    let ge = re.velocity_grad[c];
    let adv_e = ge.apply(ue);
    let due = re.velocity_dt.at(c);
    let m = [
        due[0] + adv_e[0] + grad_hp[0],
        due[1] + adv_e[1] + grad_hp[1],
    ];
    let q = dt_hp + dot(ue, grad_hp) + ge.trace() * law.dpressure(r);
    CellTerms {
        direct,
        recast: rho * dot(m, diff) + (r - rho) * q,
    }
}

/// The no-slip remainder with `(r, U) = (rho_E, u_E - v_F)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoSlipRemainders {
    pub r1: f64,
    pub r2a: f64,
    pub r2b: f64,
    pub r2c: f64,
    pub r2d: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    /// Contribution of the Euler residuals; zero for an exact reference.
    pub recast: f64,
    /// The remainder evaluated directly from its definition.
    pub direct: f64,
}

impl NoSlipRemainders {
    pub fn r2(&self) -> f64 {
        self.r2a + self.r2b + self.r2c + self.r2d
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2() + self.r3 + self.r4 + self.r5 + self.r6
    }

    /// `direct - (R_1 + ... + R_6 + recast)`.
    pub fn identity_gap(&self) -> f64 {
        self.direct - self.sum() - self.recast
    }

    /// Magnitude used to judge `identity_gap`.
    pub fn scale(&self) -> f64 {
        [
            self.r1,
            self.r2a,
            self.r2b,
            self.r2c,
            self.r2d,
            self.r3,
            self.r4,
            self.r5,
            self.r6,
            self.recast,
            self.direct,
        ]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Evaluates the direct remainder and its decomposition. `grad_u` is the
/// velocity gradient of `state`; `corrector = None` means `v_F = 0`.
pub fn remainder_noslip(
    state: &FluidField,
    grad_u: &[Tensor2],
    reference: &SampledReference,
    corrector: Option<&Corrector>,
    grid: &ChannelGrid,
    visc: &ViscosityParams,
    law: GasLaw,
) -> NoSlipRemainders {
    let pair = TestPair {
        r: reference,
        v_f: corrector,
    };
    let g = law.gamma();
    let n = grid.cells();
    let mut fields: [Vec<f64>; 11] = std::array::from_fn(|_| vec![0.0; n]);
    for c in 0..n {
        let rho = state.rho[c];
        let u = state.velocity_at(c);
        let ue = reference.velocity.at(c);
        let ge = reference.velocity_grad[c];
        let re = reference.density[c];
        let w = sub(u, ue);
        let (vf, gvf, divf, dtvf) = match corrector {
            Some(k) => (k.v_f.at(c), k.grad_v_f[c], k.div_v_f[c], k.dt_v_f.at(c)),
            None => ([0.0; 2], Tensor2::zero(), 0.0, [0.0; 2]),
        };
        let big_u = sub(ue, vf);
        let gw = ge.apply(w);
        let grad_hp = {
            let h2 = law.second_derivative_h(re);
            let d = reference.density_grad[c];
            [h2 * d[0], h2 * d[1]]
        };
        let s = stress(&grad_u[c], visc);
        let t = cell_terms(law, visc, &pair, rho, u, &grad_u[c], c);
        fields[0][c] = -rho * Tensor2::outer(w, w).dot(&ge) - rho * dot(gw, vf);
        fields[1][c] = -rho * dot(dtvf, sub(ue, u));
        fields[2][c] = rho * dot(dtvf, vf);
        fields[3][c] = -rho * dot(gvf.apply(u), big_u);
        fields[4][c] = rho * Tensor2::outer(u, u).dot(&gvf);
        fields[5][c] = -visc.eps * s.dot(&gvf) + visc.eps * s.dot(&ge);
        fields[6][c] = -(g - 1.0) * ge.trace() * law.rel_h(rho, re);
        fields[7][c] = -(re - rho) * dot(vf, grad_hp);
        fields[8][c] = divf * (law.p(rho) - law.p(re));
        fields[9][c] = t.recast;
        fields[10][c] = t.direct;
    }
    let v: Vec<f64> = fields.iter().map(|f| integrate(f, grid)).collect();
    NoSlipRemainders {
        r1: v[0],
        r2a: v[1],
        r2b: v[2],
        r2c: v[3],
        r2d: v[4],
        r3: v[5],
        r4: v[6],
        r5: v[7],
        r6: v[8],
        recast: v[9],
        direct: v[10],
    }
}

/// The Navier remainder with `(r, U) = (rho_E, u_E)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NavierRemainders {
    pub rt1: f64,
    pub rt2: f64,
    pub rt3: f64,
    pub rt4: f64,
    pub recast: f64,
    pub direct: f64,
}

impl NavierRemainders {
    pub fn sum(&self) -> f64 {
        self.rt1 + self.rt2 + self.rt3 + self.rt4
    }

    pub fn identity_gap(&self) -> f64 {
        self.direct - self.sum() - self.recast
    }
}

/// Reference velocity on the wall faces below/above each column.
pub fn reference_wall_trace(
    reference: &dyn EulerReference,
    grid: &ChannelGrid,
    t: f64,
) -> WallTrace {
    let at = |y: f64| {
        (0..grid.nx())
            .map(|i| reference.velocity(t, grid.x_center(i), y))
            .collect()
    };
    WallTrace {
        bottom: at(0.0),
        top: at(1.0),
    }
}

fn wall_pairing(a: &WallTrace, b: &WallTrace, dx: f64) -> f64 {
    let s: f64 = a
        .bottom
        .iter()
        .zip(&b.bottom)
        .chain(a.top.iter().zip(&b.top))
        .map(|(p, q)| dot(*p, *q))
        .sum();
    s * dx
}

/// `wall` is the discrete wall trace of `state`, `wall_ref` that of `u_E`.
#[allow(clippy::too_many_arguments)]
pub fn remainder_navier(
    state: &FluidField,
    grad_u: &[Tensor2],
    wall: &WallTrace,
    wall_ref: &WallTrace,
    reference: &SampledReference,
    grid: &ChannelGrid,
    visc: &ViscosityParams,
    law: GasLaw,
) -> NavierRemainders {
    let pair = TestPair {
        r: reference,
        v_f: None,
    };
    let n = grid.cells();
    let mut fields: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    for c in 0..n {
        let rho = state.rho[c];
        let u = state.velocity_at(c);
        let ue = reference.velocity.at(c);
        let ge = reference.velocity_grad[c];
        let re = reference.density[c];
        let w = sub(u, ue);
        let t = cell_terms(law, visc, &pair, rho, u, &grad_u[c], c);
        fields[0][c] = -rho * Tensor2::outer(w, w).dot(&ge);
        fields[1][c] = visc.eps * stress(&grad_u[c], visc).dot(&ge);
        fields[2][c] = -ge.trace() * (law.p(rho) - law.p(re) - law.dpressure(re) * (rho - re));
        fields[3][c] = t.recast;
        fields[4][c] = t.direct;
    }
    let v: Vec<f64> = fields.iter().map(|f| integrate(f, grid)).collect();
    let rt2 = visc.beta * wall_pairing(wall, wall_ref, grid.dx());
    NavierRemainders {
        rt1: v[0],
        rt2,
        rt3: v[1],
        rt4: v[2],
        recast: v[3],
        direct: v[4] + rt2,
    }
}

/// One row of the diagnostics table. Instantaneous columns come from
/// [`Evaluator::evaluate`]; the `*_cum` columns and `inequality_residual`
/// from [`accumulate`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub energy: f64,
    pub relative_energy_vs_euler: f64,
    pub relative_energy_vs_test: f64,
    pub density_gap_lgamma: f64,
    pub kinetic_gap: f64,
    /// `||rho u - rho_E u_E||_{L^1}`.
    pub momentum_gap_l1: f64,
    /// `int H(rho | rho_E)`.
    pub relative_entropy_integral: f64,
    pub kato_functional_rate: f64,
    pub kato_functional_cum: f64,
    pub viscous_rate: f64,
    pub viscous_cum: f64,
    pub friction_rate: f64,
    pub friction_cum: f64,
    pub grad_u_sq: f64,
    pub grad_u_sq_cum: f64,
    pub wall_u_sq: f64,
    pub wall_ue_sq: f64,
    pub r1: f64,
    pub r2: f64,
    pub r2a: f64,
    pub r2b: f64,
    pub r2c: f64,
    pub r2d: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub rt1: f64,
    pub rt2: f64,
    pub rt3: f64,
    pub rt4: f64,
    pub recast: f64,
    pub identity_gap: f64,
    /// The remainder entering the inequality: the direct no-slip remainder,
    /// or the Navier one.
    pub remainder: f64,
    pub remainder_cum: f64,
    pub inequality_residual: f64,
    pub apriori_rho_lgamma: f64,
    pub apriori_rho_u2_l1: f64,
    pub apriori_sqrt_eps_grad_u: f64,
    pub ledger_residual: f64,
    pub ledger_excess: f64,
}

/// Evaluates a [`DiagnosticsRecord`] for single snapshots of one run.
pub struct Evaluator<'a> {
    grid: &'a ChannelGrid,
    model: Model,
    reference: &'a dyn EulerReference,
    mode: Mode,
    c: f64,
    cutoff: CutoffProfile,
    mask: StripMask,
    kato_w: Vec<f64>,
    steady: Option<(SampledReference, Option<Corrector>, WallTrace)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        grid: &'a ChannelGrid,
        model: Model,
        reference: &'a dyn EulerReference,
        c: f64,
        cutoff: CutoffProfile,
    ) -> Result<Self> {
        let mask = strip_mask(grid, c, model.visc.eps)?;
        let kato_w = kato_row_weights(grid, &mask);
        let mut ev = Self {
            grid,
            model,
            reference,
            mode: Mode::of(&model),
            c,
            cutoff,
            mask,
            kato_w,
            steady: None,
        };
        if reference.is_steady() {
            ev.steady = Some(ev.test_data(0.0)?);
        }
        Ok(ev)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn mask(&self) -> &StripMask {
        &self.mask
    }

    fn test_data(&self, t: f64) -> Result<(SampledReference, Option<Corrector>, WallTrace)> {
        let s = sample(self.reference, self.grid, t);
        let cor = match self.mode {
            Mode::NoSlip => Some(build_corrector(
                self.reference,
                self.grid,
                self.c,
                self.model.visc.eps,
                self.cutoff,
                t,
            )?),
            Mode::Navier => None,
        };
        Ok((s, cor, reference_wall_trace(self.reference, self.grid, t)))
    }

    pub fn evaluate(
        &self,
        step: usize,
        time: f64,
        dt: f64,
        state: &FluidField,
        ledger: Option<&EnergyLedger>,
    ) -> Result<DiagnosticsRecord> {
        let owned;
        let (re, cor, wall_ref) = match &self.steady {
            Some((a, b, w)) => (a, b.as_ref(), w),
            None => {
                owned = self.test_data(time)?;
                (&owned.0, owned.1.as_ref(), &owned.2)
            }
        };
        let grid = self.grid;
        let law = self.model.law;
        let visc = &self.model.visc;
        let g = law.gamma();
        let grad_u = velocity_gradient(state, grid, &self.model);
        let wall = wall_trace(state, grid, &self.model);
        let n = grid.cells();

        let mut rec = DiagnosticsRecord {
            step,
            time,
            dt,
            energy: state.energy(grid, law),
            ..Default::default()
        };
        rec.relative_energy_vs_euler =
            relative_energy(state, &re.density, &re.velocity, grid, law)?;
        rec.relative_energy_vs_test = match cor {
            Some(k) => {
                let mut u = re.velocity.clone();
                for c in 0..n {
                    u.x[c] -= k.v_f.x[c];
                    u.y[c] -= k.v_f.y[c];
                }
                relative_energy(state, &re.density, &u, grid, law)?
            }
            None => rec.relative_energy_vs_euler,
        };
        let gap: Vec<f64> = (0..n).map(|c| state.rho[c] - re.density[c]).collect();
        rec.density_gap_lgamma = lp_norm(&gap, grid, g, None);
        let mut kin = vec![0.0; n];
        let mut hrel = vec![0.0; n];
        let mut ru2 = vec![0.0; n];
        let mut gsq = vec![0.0; n];
        let mut vr = vec![0.0; n];
        let mut mom = vec![0.0; n];
        for c in 0..n {
            let u = state.velocity_at(c);
            let ue = re.velocity.at(c);
            let w = sub(u, ue);
            kin[c] = state.rho[c] * dot(w, w);
            mom[c] =
                (state.mx[c] - re.density[c] * ue[0]).hypot(state.my[c] - re.density[c] * ue[1]);
            hrel[c] = law.rel_h(state.rho[c], re.density[c]);
            ru2[c] = state.rho[c] * dot(u, u);
            gsq[c] = grad_u[c].norm_sq();
            vr[c] = stress(&grad_u[c], visc).dot(&grad_u[c]);
        }
        rec.kinetic_gap = integrate(&kin, grid);
        rec.momentum_gap_l1 = integrate(&mom, grid);
        rec.relative_entropy_integral = integrate(&hrel, grid);
        rec.grad_u_sq = integrate(&gsq, grid);
        rec.apriori_rho_lgamma = lp_norm(&state.rho, grid, g, None);
        rec.apriori_rho_u2_l1 = integrate(&ru2, grid);
        rec.kato_functional_rate = kato_rate(state, &grad_u, grid, &self.mask, &self.kato_w);
        rec.wall_u_sq = wall.sq_integral(grid.dx());
        rec.wall_ue_sq = wall_ref.sq_integral(grid.dx());
        if self.model.viscous {
            rec.viscous_rate = visc.eps * integrate(&vr, grid);
            if self.mode == Mode::Navier {
                rec.friction_rate = self.model.bc.beta * rec.wall_u_sq;
            }
        }
        match self.mode {
            Mode::NoSlip => {
                let r = remainder_noslip(state, &grad_u, re, cor, grid, visc, law);
                rec.r1 = r.r1;
                rec.r2 = r.r2();
                rec.r2a = r.r2a;
                rec.r2b = r.r2b;
                rec.r2c = r.r2c;
                rec.r2d = r.r2d;
                rec.r3 = r.r3;
                rec.r4 = r.r4;
                rec.r5 = r.r5;
                rec.r6 = r.r6;
                rec.recast = r.recast;
                rec.identity_gap = r.identity_gap();
                rec.remainder = r.direct;
            }
            Mode::Navier => {
                let mut v = *visc;
                v.beta = self.model.bc.beta;
                let r = remainder_navier(state, &grad_u, &wall, wall_ref, re, grid, &v, law);
                rec.rt1 = r.rt1;
                rec.rt2 = r.rt2;
                rec.rt3 = r.rt3;
                rec.rt4 = r.rt4;
                rec.recast = r.recast;
                rec.identity_gap = r.identity_gap();
                rec.remainder = r.direct;
            }
        }
        if let Some(l) = ledger {
            rec.ledger_residual = l.residual();
            rec.ledger_excess = l.excess;
        }
        Ok(rec)
    }
}

/// Fills the time integrals, the a-priori column and the inequality slack
/// `E_0 + int R - (E_rel + int eps S:grad u + int beta |u|^2)` in time order.
pub fn accumulate(records: &mut [DiagnosticsRecord], eps: f64) {
    let Some(first) = records.first().copied() else {
        return;
    };
    let e0 = first.relative_energy_vs_test;
    let mut prev = first;
    for (k, r) in records.iter_mut().enumerate() {
        if k == 0 {
            r.kato_functional_cum = 0.0;
            r.viscous_cum = 0.0;
            r.friction_cum = 0.0;
            r.grad_u_sq_cum = 0.0;
            r.remainder_cum = 0.0;
        } else {
            let h = 0.5 * (r.time - prev.time);
            r.kato_functional_cum =
                prev.kato_functional_cum + h * (prev.kato_functional_rate + r.kato_functional_rate);
            r.viscous_cum = prev.viscous_cum + h * (prev.viscous_rate + r.viscous_rate);
            r.friction_cum = prev.friction_cum + h * (prev.friction_rate + r.friction_rate);
            r.grad_u_sq_cum = prev.grad_u_sq_cum + h * (prev.grad_u_sq + r.grad_u_sq);
            r.remainder_cum = prev.remainder_cum + h * (prev.remainder + r.remainder);
        }
        r.apriori_sqrt_eps_grad_u = (eps * r.grad_u_sq_cum).sqrt();
        r.inequality_residual =
            e0 + r.remainder_cum - (r.relative_energy_vs_test + r.viscous_cum + r.friction_cum);
        prev = *r;
    }
}

/// Every `stride`-th record plus the last one, re-accumulated.
pub fn subsample(records: &[DiagnosticsRecord], stride: usize, eps: f64) -> Vec<DiagnosticsRecord> {
    let stride = stride.max(1);
    let mut out: Vec<DiagnosticsRecord> = records.iter().step_by(stride).copied().collect();
    if let Some(last) = records.last() {
        if out.last().map(|r| r.step) != Some(last.step) {
            out.push(*last);
        }
    }
    accumulate(&mut out, eps);
    out
}

/// Largest relative change of the final cumulative integrals when the
/// recording cadence is halved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CadenceCheck {
    pub kato: f64,
    pub viscous: f64,
    pub friction: f64,
    pub remainder: f64,
    /// Absolute change of the final slack.
    pub residual_abs: f64,
}

impl CadenceCheck {
    pub fn max_relative(&self) -> f64 {
        self.kato
            .max(self.viscous)
            .max(self.friction)
            .max(self.remainder)
    }
}

pub fn cadence_check(records: &[DiagnosticsRecord], eps: f64) -> Result<CadenceCheck> {
    if records.len() < 3 {
        return Err(Error::TooFewPoints {
            have: records.len(),
            need: 3,
        });
    }
    let half = subsample(records, 2, eps);
    let (a, b) = (records[records.len() - 1], half[half.len() - 1]);
    let rel = |x: f64, y: f64| {
        let s = x.abs().max(y.abs());
        if s == 0.0 {
            0.0
        } else {
            (x - y).abs() / s
        }
    };
    Ok(CadenceCheck {
        kato: rel(a.kato_functional_cum, b.kato_functional_cum),
        viscous: rel(a.viscous_cum, b.viscous_cum),
        friction: rel(a.friction_cum, b.friction_cum),
        remainder: rel(a.remainder_cum, b.remainder_cum),
        residual_abs: (a.inequality_residual - b.inequality_residual).abs(),
    })
}

/// Slack series of the relative energy inequality and its worst point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityResidual {
    pub mode: Mode,
    pub time: Vec<f64>,
    pub slack: Vec<f64>,
    pub min_slack: f64,
    pub min_time: f64,
}

pub fn inequality_residual(records: &[DiagnosticsRecord], mode: Mode) -> InequalityResidual {
    let slack: Vec<f64> = records.iter().map(|r| r.inequality_residual).collect();
    let (k, min_slack) =
        slack
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bk, bm), (k, v)| if v < bm { (k, v) } else { (bk, bm) },
            );
    InequalityResidual {
        mode,
        time: records.iter().map(|r| r.time).collect(),
        min_time: records.get(k).map_or(0.0, |r| r.time),
        slack,
        min_slack,
    }
}

/// `o(t) = max(0, |R(t)| - C E(t))` with the least `C <= c_cap` that makes
/// `int o` minimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallFit {
    pub c: f64,
    pub offset: Vec<f64>,
    pub offset_l1: f64,
}

pub const DEFAULT_GRONWALL_CAP: f64 = 10.0;

pub fn gronwall_check(records: &[DiagnosticsRecord], c_cap: f64) -> Result<GronwallFit> {
    if !(c_cap >= 0.0) {
        return Err(invalid("c_cap", format!("{c_cap} must be >= 0")));
    }
    // int o is nonincreasing in C and stops decreasing once C reaches every
    // ratio |R| / E with E > 0.
    let c = records
        .iter()
        .filter(|r| r.relative_energy_vs_euler > 0.0)
        .map(|r| r.remainder.abs() / r.relative_energy_vs_euler)
        .fold(0.0_f64, f64::max)
        .min(c_cap);
    let offset: Vec<f64> = records
        .iter()
        .map(|r| (r.remainder.abs() - c * r.relative_energy_vs_euler).max(0.0))
        .collect();
    let offset_l1 = records
        .windows(2)
        .zip(offset.windows(2))
        .map(|(r, o)| 0.5 * (r[1].time - r[0].time) * (o[0] + o[1]))
        .sum();
    Ok(GronwallFit {
        c,
        offset,
        offset_l1,
    })
}

/// `(sup_t ||rho||_{L^gamma}, sup_t ||rho u^2||_{L^1}, sqrt(eps) ||grad u||_{L^2_{t,x}})`
/// over accumulated records.
pub fn apriori_norms(records: &[DiagnosticsRecord]) -> [f64; 3] {
    let sup = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).fold(0.0_f64, f64::max);
    [
        sup(|r| r.apriori_rho_lgamma),
        sup(|r| r.apriori_rho_u2_l1),
        records.last().map_or(0.0, |r| r.apriori_sqrt_eps_grad_u),
    ]
}

/// Exponent on `int H` in the first control inequality. The quadratic branch
/// of the sandwich bound only gives `||rho - r||^gamma <= C (int H)^{gamma/2}`
/// when `gamma < 2`.
pub fn control_exponent(gamma: f64) -> f64 {
    if gamma < 2.0 {
        0.5 * gamma
    } else {
        gamma
    }
}

/// Constants of the two control inequalities
/// `C ||d||^g <= (int H)^a + int H` and `C int H <= ||d||^g + ||d||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlConstants {
    pub exponent: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `((int H)^a + int H) / ||d||^g` and `(||d||^g + ||d||^2) / int H`.
pub fn control_ratios(h_int: f64, gap_lgamma: f64, gamma: f64, exponent: f64) -> (f64, f64) {
    let dg = gap_lgamma.powf(gamma);
    (
        (h_int.powf(exponent) + h_int) / dg,
        (dg + gap_lgamma * gap_lgamma) / h_int,
    )
}

/// Fits both constants on a deterministic family of densities around
/// constant `r` in `[lo, hi]`: global and localized bumps over amplitudes
/// from `1e-3` up to the distance to vacuum.
pub fn fit_control_constants(
    law: GasLaw,
    grid: &ChannelGrid,
    lo: f64,
    hi: f64,
) -> Result<ControlConstants> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(invalid(
            "compact",
            format!("[{lo}, {hi}] must lie in (0, inf)"),
        ));
    }
    let g = law.gamma();
    let a = control_exponent(g);
    let (mut lower, mut upper) = (f64::INFINITY, f64::INFINITY);
    let two_pi = 2.0 * std::f64::consts::PI;
    for r in [lo, 0.5 * (lo + hi), hi] {
        for support in [1.0, 0.25, 1.0 / 16.0] {
            for k in 0..=30 {
                let amp = 1e-3 * (4.0 * r / 1e-3).powf(k as f64 / 30.0);
                for sign in [1.0, -1.0] {
                    let rho: Vec<f64> = (0..grid.cells())
                        .map(|c| {
                            let y = grid.y_center(grid.row_of(c));
                            let x = grid.x_center(c % grid.nx()) / grid.length_x();
                            let s = if x < support && y < support {
                                (two_pi * x / support).sin().powi(2)
                            } else {
                                0.0
                            };
                            (r + sign * amp * s).max(0.0)
                        })
                        .collect();
                    let h: Vec<f64> = rho.iter().map(|p| law.rel_h(*p, r)).collect();
                    let d: Vec<f64> = rho.iter().map(|p| p - r).collect();
                    let (hi_, dn) = (integrate(&h, grid), lp_norm(&d, grid, g, None));
                    if hi_ <= 0.0 || dn <= 0.0 {
                        continue;
                    }
                    let (p, q) = control_ratios(hi_, dn, g, a);
                    lower = lower.min(p);
                    upper = upper.min(q);
                }
            }
        }
    }
    if !lower.is_finite() {
        return Err(Error::NoValidSamples("no nondegenerate control sample"));
    }
    Ok(ControlConstants {
        exponent: a,
        lower,
        upper,
    })
}

/// Term-by-term checks of the Navier absorption estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionReport {
    /// `max_t |R~2| - beta/2 (int |u|^2 + int |u_E|^2)`; `<= 0` when it holds.
    pub rt2_margin: f64,
    /// Least `C` with `|R~3| <= C0 eps / 2 int |grad u|^2 + C eps`.
    pub rt3_constant: f64,
    /// `max_t |R~4| - (gamma - 1) max|div u_E| E_rel`.
    pub rt4_margin: f64,
}

pub fn absorption_checks(
    records: &[DiagnosticsRecord],
    c0: f64,
    eps: f64,
    beta: f64,
    gamma: f64,
    max_div_ue: f64,
) -> AbsorptionReport {
    let mut out = AbsorptionReport {
        rt2_margin: f64::NEG_INFINITY,
        rt3_constant: 0.0,
        rt4_margin: f64::NEG_INFINITY,
    };
    for r in records {
        out.rt2_margin = out
            .rt2_margin
            .max(r.rt2.abs() - 0.5 * beta * (r.wall_u_sq + r.wall_ue_sq));
        out.rt3_constant = out
            .rt3_constant
            .max((r.rt3.abs() - 0.5 * c0 * eps * r.grad_u_sq) / eps);
        out.rt4_margin = out
            .rt4_margin
            .max(r.rt4.abs() - (gamma - 1.0) * max_div_ue * r.relative_energy_vs_euler);
    }
    out
}

pub fn write_records_csv<W: Write>(records: &[DiagnosticsRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(r: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}
