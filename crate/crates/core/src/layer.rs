//! Kato's fake boundary layer `v_F = xi(d / (c eps)) u_E` and the check of
//! its norm scalings in `eps`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{lp_norm, strip_mask, ChannelGrid, VectorField};
use crate::error::{invalid, Error, Result};
use crate::exec::{map_collect, Execution};
use crate::harness::fit_order;
use crate::reference::EulerReference;
use crate::tensor::Tensor2;

/// Cut-off with `xi(0) = 1` and `xi = 0` on `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CutoffProfile {
    /// `1 - 10 r^3 + 15 r^4 - 6 r^5`, C^2 at both ends.
    #[default]
    Quintic,
    /// `(1 + cos(pi r)) / 2`.
    Cosine,
}

impl CutoffProfile {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "quintic" => Ok(Self::Quintic),
            "cosine" => Ok(Self::Cosine),
            other => Err(invalid(
                "cutoff",
                format!("unknown cutoff {other:?} (quintic, cosine)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quintic => "quintic",
            Self::Cosine => "cosine",
        }
    }

    pub fn xi(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let r = r.max(0.0);
        match self {
            Self::Quintic => 1.0 - r * r * r * (10.0 - 15.0 * r + 6.0 * r * r),
            Self::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * r).cos()),
        }
    }

    pub fn xi_prime(&self, r: f64) -> f64 {
        if !(0.0..1.0).contains(&r) {
            return 0.0;
        }
        match self {
            Self::Quintic => -30.0 * r * r * (1.0 - r) * (1.0 - r),
            Self::Cosine => -0.5 * std::f64::consts::PI * (std::f64::consts::PI * r).sin(),
        }
    }

    /// `r xi'(r)`.
    pub fn xi_tilde(&self, r: f64) -> f64 {
        r * self.xi_prime(r)
    }

    /// `r^2 xi'(r)`.
    pub fn xi_hat(&self, r: f64) -> f64 {
        r * r * self.xi_prime(r)
    }

    /// Closed form of `int_0^1 xi(r)^2 dr`.
    pub fn xi_sq_integral(&self) -> f64 {
        match self {
            Self::Quintic => 181.0 / 462.0,
            Self::Cosine => 3.0 / 8.0,
        }
    }
}

/// `v_F` and its derivatives sampled at cell centers.
#[derive(Debug, Clone)]
pub struct Corrector {
    pub c: f64,
    pub eps: f64,
    pub profile: CutoffProfile,
    pub time: f64,
    pub v_f: VectorField,
    pub grad_v_f: Vec<Tensor2>,
    pub div_v_f: Vec<f64>,
    pub dt_v_f: VectorField,
    pub z: Vec<f64>,
    pub z_tilde: Vec<f64>,
    pub z_hat: Vec<f64>,
    /// `(u_E . grad d) / d`, so that `div v_F = z div u_E + phi z_tilde`.
    pub phi: Vec<f64>,
}

/// Pointwise values of the corrector at `(x, y)`.
#[derive(Debug, Clone, Copy)]
pub struct CorrectorPoint {
    pub z: f64,
    pub v_f: [f64; 2],
    pub grad: Tensor2,
    pub div: f64,
    pub dt_v_f: [f64; 2],
    pub phi: f64,
    pub r: f64,
}

fn check_strip(c: f64, eps: f64) -> Result<()> {
    if !(c > 0.0 && eps > 0.0) {
        return Err(invalid(
            "c*eps",
            format!("c = {c}, eps = {eps} must be > 0"),
        ));
    }
    if c * eps >= 0.5 {
        return Err(Error::StripNotWellDefined { width: c * eps });
    }
    Ok(())
}

/// Corrector at a point; `grad` is assembled from the chain rule with the
/// exact `grad d = +e_y` (lower half) or `-e_y` (upper half).
pub fn corrector_at(
    reference: &dyn EulerReference,
    c: f64,
    eps: f64,
    profile: CutoffProfile,
    t: f64,
    x: f64,
    y: f64,
) -> CorrectorPoint {
    let w = c * eps;
    let d = y.min(1.0 - y);
    let grad_d = if y <= 0.5 { [0.0, 1.0] } else { [0.0, -1.0] };
    let r = d / w;
    let z = profile.xi(r);
    let dz = profile.xi_prime(r) / w;
    let grad_z = [dz * grad_d[0], dz * grad_d[1]];
    let u = reference.velocity(t, x, y);
    let g = reference.velocity_grad(t, x, y);
    let du = reference.velocity_dt(t, x, y);
    let grad = z * g + Tensor2::outer(u, grad_z);
    let phi = if d > 0.0 {
        (u[0] * grad_d[0] + u[1] * grad_d[1]) / d
    } else {
        // limit d -> 0 of (u . grad d) / d is the normal derivative of u . grad d
        let gu = g.apply(grad_d);
        gu[0] * grad_d[0] + gu[1] * grad_d[1]
    };
    CorrectorPoint {
        z,
        v_f: [z * u[0], z * u[1]],
        div: z * g.trace() + u[0] * grad_z[0] + u[1] * grad_z[1],
        grad,
        dt_v_f: [z * du[0], z * du[1]],
        phi,
        r,
    }
}

pub fn build_corrector(
    reference: &dyn EulerReference,
    grid: &ChannelGrid,
    c: f64,
    eps: f64,
    profile: CutoffProfile,
    t: f64,
) -> Result<Corrector> {
    check_strip(c, eps)?;
    let n = grid.cells();
    let mut out = Corrector {
        c,
        eps,
        profile,
        time: t,
        v_f: VectorField::zeros(grid),
        grad_v_f: vec![Tensor2::zero(); n],
        div_v_f: vec![0.0; n],
        dt_v_f: VectorField::zeros(grid),
        z: vec![0.0; n],
        z_tilde: vec![0.0; n],
        z_hat: vec![0.0; n],
        phi: vec![0.0; n],
    };
    for j in 0..grid.ny() {
        let y = grid.y_center(j);
        for i in 0..grid.nx() {
            let k = grid.idx(i, j);
            let p = corrector_at(reference, c, eps, profile, t, grid.x_center(i), y);
            out.z[k] = p.z;
            out.z_tilde[k] = profile.xi_tilde(p.r);
            out.z_hat[k] = profile.xi_hat(p.r);
            out.v_f.x[k] = p.v_f[0];
            out.v_f.y[k] = p.v_f[1];
            out.grad_v_f[k] = p.grad;
            out.div_v_f[k] = p.div;
            out.dt_v_f.x[k] = p.dt_v_f[0];
            out.dt_v_f.y[k] = p.dt_v_f[1];
            out.phi[k] = p.phi;
        }
    }
    Ok(out)
}

/// `max |u_E - v_F|` over the wall faces.
pub fn wall_mismatch(
    reference: &dyn EulerReference,
    grid: &ChannelGrid,
    c: f64,
    eps: f64,
    profile: CutoffProfile,
    t: f64,
) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..grid.nx() {
        let x = grid.x_center(i);
        for y in [0.0, 1.0] {
            let u = reference.velocity(t, x, y);
            let p = corrector_at(reference, c, eps, profile, t, x, y);
            m = m.max((u[0] - p.v_f[0]).hypot(u[1] - p.v_f[1]));
        }
    }
    m
}

/// Norms whose `eps` exponents are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `sup |v_F|`.
    VfSup,
    /// `||v_F||_{L^p}`.
    VfLp,
    /// `||dt v_F||_{L^p}`.
    DtVfLp,
    /// `||grad v_F||_{L^2(strip)}`.
    GradVfStripL2,
    /// `||d grad v_F||_{L^2}`.
    DistGradVfL2,
    /// `sup |d^2 grad v_F|`.
    Dist2GradVfSup,
    /// `sup |div v_F|`.
    DivVfSup,
    /// `||div v_F||_{L^p}`.
    DivVfLp,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Self::VfSup => "vf_sup",
            Self::VfLp => "vf_lp",
            Self::DtVfLp => "dt_vf_lp",
            Self::GradVfStripL2 => "grad_vf_strip_l2",
            Self::DistGradVfL2 => "dist_grad_vf_l2",
            Self::Dist2GradVfSup => "dist2_grad_vf_sup",
            Self::DivVfSup => "div_vf_sup",
            Self::DivVfLp => "div_vf_lp",
        }
    }

    /// Expected exponent of `eps`; `p` only matters for the `L^p` rows.
    pub fn expected(&self, p: f64) -> f64 {
        let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
        match self {
            Self::VfSup | Self::DivVfSup => 0.0,
            Self::VfLp | Self::DtVfLp | Self::DivVfLp => inv_p,
            Self::GradVfStripL2 => -0.5,
            Self::DistGradVfL2 => 0.5,
            Self::Dist2GradVfSup => 1.0,
        }
    }

    fn uses_p(&self) -> bool {
        matches!(self, Self::VfLp | Self::DtVfLp | Self::DivVfLp)
    }
}

/// Every norm of one corrector, keyed by `(quantity, p)`.
pub fn corrector_norms(
    cor: &Corrector,
    grid: &ChannelGrid,
    p_list: &[f64],
) -> Result<Vec<(Quantity, f64, f64)>> {
    let mask = strip_mask(grid, cor.c, cor.eps)?;
    let vmag = cor.v_f.magnitude();
    let dtmag = cor.dt_v_f.magnitude();
    let gmag: Vec<f64> = cor.grad_v_f.iter().map(|g| g.norm_sq().sqrt()).collect();
    let d1: Vec<f64> = gmag
        .iter()
        .enumerate()
        .map(|(k, g)| grid.distance(k) * g)
        .collect();
    let d2: Vec<f64> = gmag
        .iter()
        .enumerate()
        .map(|(k, g)| grid.distance(k).powi(2) * g)
        .collect();
    let inf = f64::INFINITY;
    let mut out = vec![
        (Quantity::VfSup, inf, lp_norm(&vmag, grid, inf, None)),
        (
            Quantity::GradVfStripL2,
            2.0,
            lp_norm(&gmag, grid, 2.0, Some(&mask)),
        ),
        (Quantity::DistGradVfL2, 2.0, lp_norm(&d1, grid, 2.0, None)),
        (Quantity::Dist2GradVfSup, inf, lp_norm(&d2, grid, inf, None)),
        (
            Quantity::DivVfSup,
            inf,
            lp_norm(&cor.div_v_f, grid, inf, None),
        ),
    ];
    for &p in p_list {
        out.push((Quantity::VfLp, p, lp_norm(&vmag, grid, p, None)));
        out.push((Quantity::DtVfLp, p, lp_norm(&dtmag, grid, p, None)));
        out.push((Quantity::DivVfLp, p, lp_norm(&cor.div_v_f, grid, p, None)));
    }
    Ok(out)
}

/// One fitted row of the scaling table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub quantity: Quantity,
    pub p: f64,
    pub eps: Vec<f64>,
    pub norms: Vec<f64>,
    /// `None` when every norm is zero (the row is structurally trivial).
    pub slope: Option<f64>,
    pub width: Option<f64>,
    pub expected: f64,
}

impl ScalingRow {
    pub fn skipped(&self) -> bool {
        self.slope.is_none()
    }

    pub fn within(&self, tol: f64) -> bool {
        self.slope.is_none_or(|s| (s - self.expected).abs() <= tol)
    }
}

/// Norms below this fraction of the largest norm in the run are treated as
/// exactly zero.
const ZERO_NORM: f64 = 1e-14;

/// Builds the corrector at each `eps` on `grid_for(eps)` and fits the
/// log-log slope of every norm.
pub fn verify_scalings(
    reference: &dyn EulerReference,
    grid_for: &(dyn Fn(f64) -> Result<ChannelGrid> + Sync),
    c: f64,
    eps_list: &[f64],
    profile: CutoffProfile,
    p_list: &[f64],
    t: f64,
    exec: Execution,
) -> Result<Vec<ScalingRow>> {
    if eps_list.len() < 5 {
        return Err(Error::TooFewPoints {
            have: eps_list.len(),
            need: 5,
        });
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps_list", "must be strictly decreasing"));
    }
    if let Some(&p) = p_list.iter().find(|p| !(**p >= 1.0)) {
        return Err(invalid("p", format!("{p} must be >= 1")));
    }
    for &e in eps_list {
        check_strip(c, e)?;
    }
    let per_eps = map_collect(
        exec,
        eps_list.len(),
        |k| -> Result<Vec<(Quantity, f64, f64)>> {
            let eps = eps_list[k];
            let grid = grid_for(eps)?;
            grid.check_resolves(c * eps, 8)?;
            let cor = build_corrector(reference, &grid, c, eps, profile, t)?;
            corrector_norms(&cor, &grid, p_list)
        },
    );
    let per_eps: Vec<Vec<(Quantity, f64, f64)>> = per_eps.into_iter().collect::<Result<_>>()?;
    let scale = per_eps
        .iter()
        .flatten()
        .map(|r| r.2)
        .fold(0.0_f64, f64::max);
    let mut rows = Vec::new();
    for (idx, &(q, p, _)) in per_eps[0].iter().enumerate() {
        let norms: Vec<f64> = per_eps.iter().map(|v| v[idx].2).collect();
        let trivial = norms.iter().all(|n| *n <= ZERO_NORM * scale);
        let (slope, width) = if trivial {
            (None, None)
        } else {
            let pairs: Vec<(f64, f64)> = eps_list
                .iter()
                .copied()
                .zip(norms.iter().copied())
                .collect();
            let f = fit_order(&pairs)?;
            (Some(f.slope), Some(f.width))
        };
        rows.push(ScalingRow {
            quantity: q,
            p: if q.uses_p() || p.is_infinite() {
                p
            } else {
                2.0
            },
            eps: eps_list.to_vec(),
            norms,
            slope,
            width,
            expected: q.expected(p),
        });
    }
    Ok(rows)
}

/// `quantity,p,eps,norm,fitted_slope,expected_slope`; skipped rows have an
/// empty slope.
pub fn write_scalings_csv<W: Write>(rows: &[ScalingRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "quantity",
        "p",
        "eps",
        "norm",
        "fitted_slope",
        "expected_slope",
    ])?;
    for r in rows {
        for (e, n) in r.eps.iter().zip(&r.norms) {
            out.write_record([
                r.quantity.name().to_string(),
                if r.p.is_infinite() {
                    "inf".into()
                } else {
                    format!("{}", r.p)
                },
                format!("{e:e}"),
                format!("{n:e}"),
                r.slope.map(|s| format!("{s:.6}")).unwrap_or_default(),
                format!("{}", r.expected),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{shear_flow, Profile};

    #[test]
    fn cutoff_endpoints() {
        for p in [CutoffProfile::Quintic, CutoffProfile::Cosine] {
            assert_eq!(p.xi(0.0), 1.0);
            assert_eq!(p.xi(1.0), 0.0);
            assert_eq!(p.xi(3.0), 0.0);
            assert_eq!(p.xi_tilde(0.0), 0.0);
            assert_eq!(p.xi_hat(0.0), 0.0);
            assert!(p.xi(0.999_999).abs() < 1e-10);
            for k in 1..20 {
                let r = k as f64 / 20.0;
                let h = 1e-6;
                let fd = (p.xi(r + h) - p.xi(r - h)) / (2.0 * h);
                assert!((fd - p.xi_prime(r)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn xi_sq_integral_by_quadrature() {
        for p in [CutoffProfile::Quintic, CutoffProfile::Cosine] {
            let n = 20_000;
            let q: f64 = (0..n)
                .map(|k| {
                    let r = (k as f64 + 0.5) / n as f64;
                    p.xi(r).powi(2)
                })
                .sum::<f64>()
                / n as f64;
            assert!((q - p.xi_sq_integral()).abs() < 1e-8, "{q}");
        }
    }

    #[test]
    fn support_and_wall_match() {
        let g = ChannelGrid::build(1.0, 8, 64, 4.0).unwrap();
        let r = shear_flow(Profile::from_name("sine").unwrap());
        let (c, eps) = (2.0, 0.02);
        let cor = build_corrector(&r, &g, c, eps, CutoffProfile::Quintic, 0.0).unwrap();
        for k in 0..g.cells() {
            if g.distance(k) >= c * eps {
                assert_eq!(cor.v_f.x[k], 0.0);
                assert_eq!(cor.v_f.y[k], 0.0);
            }
            // shear: u_E . n = 0, div u_E = 0
            assert_eq!(cor.phi[k], 0.0);
            assert_eq!(cor.div_v_f[k], 0.0);
        }
        assert_eq!(
            wall_mismatch(&r, &g, c, eps, CutoffProfile::Quintic, 0.0),
            0.0
        );
        assert!(build_corrector(&r, &g, 10.0, 0.05, CutoffProfile::Quintic, 0.0).is_err());
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let r = shear_flow(Profile::from_name("sine").unwrap());
        let (c, eps) = (1.0, 0.1);
        for y in [0.013, 0.05, 0.08, 0.93] {
            let p = corrector_at(&r, c, eps, CutoffProfile::Cosine, 0.0, 0.3, y);
            let h = 1e-6;
            let a = corrector_at(&r, c, eps, CutoffProfile::Cosine, 0.0, 0.3, y + h);
            let b = corrector_at(&r, c, eps, CutoffProfile::Cosine, 0.0, 0.3, y - h);
            let fd = (a.v_f[0] - b.v_f[0]) / (2.0 * h);
            assert!(
                (fd - p.grad.0[0][1]).abs() < 1e-6,
                "{y}: {fd} vs {}",
                p.grad.0[0][1]
            );
        }
    }
}
