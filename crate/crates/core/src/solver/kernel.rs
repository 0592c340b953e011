//! Semi-discrete right-hand side: MUSCL-minmod reconstruction of primitive
//! variables, Rusanov convective fluxes with wave speeds taken from the two
//! adjacent cell centers, central viscous fluxes.

use crate::domain::{lagrange_d1, ChannelGrid};
use crate::exec::{for_each_row, for_each_row3, Execution};
use crate::thermo::GasLaw;

use super::{FluidField, Model, Source, VACUUM_FLOOR};

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Primitive variables with one ghost row below and above (row `r = j + 1`).
#[derive(Debug, Clone, Default)]
pub(crate) struct Ghosted {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Sound speed at each ghosted center.
    pub c: Vec<f64>,
}

/// Static per-grid data used by the kernel.
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    /// Cell centers including mirrored ghost centers, length `ny + 2`.
    pub yc: Vec<f64>,
    pub faces: Vec<f64>,
    pub heights: Vec<f64>,
    /// Ghost-aware three-point `d/dy` weights for interior rows.
    pub dy_w: Vec<[f64; 3]>,
}

impl Geometry {
    pub fn new(grid: &ChannelGrid) -> Self {
        let ny = grid.ny();
        let mut yc = Vec::with_capacity(ny + 2);
        yc.push(-grid.y_center(0));
        yc.extend_from_slice(grid.y_centers());
        yc.push(2.0 - grid.y_center(ny - 1));
        let dy_w = (1..=ny)
            .map(|r| lagrange_d1(yc[r], yc[r - 1], yc[r], yc[r + 1]))
            .collect();
        Self {
            nx: grid.nx(),
            ny,
            dx: grid.dx(),
            yc,
            faces: grid.y_faces().to_vec(),
            heights: grid.heights().to_vec(),
            dy_w,
        }
    }
}

/// Ghost multiplier for the tangential velocity at a wall whose first
/// center-to-ghost distance is `h`.
#[inline]
pub(crate) fn tangential_factor(model: &Model, h: f64) -> f64 {
    use super::BcKind;
    match model.bc.kind {
        BcKind::NoSlip => -1.0,
        BcKind::Navier => {
            if !model.viscous {
                return 1.0;
            }
            let a = model.visc.eps * model.visc.mu / h;
            let b = 0.5 * model.bc.beta;
            (a - b) / (a + b)
        }
    }
}

pub(crate) fn fill_ghosted(
    exec: Execution,
    state: &FluidField,
    geo: &Geometry,
    model: &Model,
    out: &mut Ghosted,
) {
    let nx = geo.nx;
    let ny = geo.ny;
    let len = (ny + 2) * nx;
    out.rho.resize(len, 0.0);
    out.u.resize(len, 0.0);
    out.v.resize(len, 0.0);
    out.c.resize(len, 0.0);
    let inner = nx..(ny + 1) * nx;
    for_each_row3(
        exec,
        &mut out.rho[inner.clone()],
        &mut out.u[inner.clone()],
        &mut out.v[inner],
        nx,
        |j, r, u, v| {
            let base = j * nx;
            for i in 0..nx {
                let c = base + i;
                let rho = state.rho[c];
                r[i] = rho;
                if rho > VACUUM_FLOOR {
                    u[i] = state.mx[c] / rho;
                    v[i] = state.my[c] / rho;
                } else {
                    u[i] = 0.0;
                    v[i] = 0.0;
                }
            }
        },
    );
    let law = model.law;
    for_each_row(exec, &mut out.c[nx..(ny + 1) * nx], nx, |j, row| {
        for i in 0..nx {
            row[i] = law.sound_speed(state.rho[j * nx + i]);
        }
    });
    let kb = tangential_factor(model, geo.heights[0]);
    let kt = tangential_factor(model, geo.heights[ny - 1]);
    for i in 0..nx {
        let (g, s) = (i, nx + i);
        out.c[g] = out.c[s];
        out.c[(ny + 1) * nx + i] = out.c[ny * nx + i];
        out.rho[g] = out.rho[s];
        out.u[g] = kb * out.u[s];
        out.v[g] = -out.v[s];
        let (g, s) = ((ny + 1) * nx + i, ny * nx + i);
        out.rho[g] = out.rho[s];
        out.u[g] = kt * out.u[s];
        out.v[g] = -out.v[s];
    }
}

/// Ghost-aware cell-centered `du/dy`, `dv/dy` for interior cells.
pub(crate) fn fill_dy(
    exec: Execution,
    g: &Ghosted,
    geo: &Geometry,
    dyu: &mut Vec<f64>,
    dyv: &mut Vec<f64>,
) {
    let nx = geo.nx;
    dyu.resize(geo.ny * nx, 0.0);
    dyv.resize(geo.ny * nx, 0.0);
    for_each_row(exec, dyu, nx, |j, row| {
        let w = geo.dy_w[j];
        let r = j + 1;
        for i in 0..nx {
            row[i] = w[0] * g.u[(r - 1) * nx + i]
                + w[1] * g.u[r * nx + i]
                + w[2] * g.u[(r + 1) * nx + i];
        }
    });
    for_each_row(exec, dyv, nx, |j, row| {
        let w = geo.dy_w[j];
        let r = j + 1;
        for i in 0..nx {
            row[i] = w[0] * g.v[(r - 1) * nx + i]
                + w[1] * g.v[r * nx + i]
                + w[2] * g.v[(r + 1) * nx + i];
        }
    });
}

#[inline]
fn viscous_stress(model: &Model, ux: f64, uy: f64, vx: f64, vy: f64) -> (f64, f64, f64) {
    let mu = model.visc.mu;
    let lam = model.visc.eta - 2.0 * mu / 3.0;
    let tr = ux + vy;
    let sxx = 2.0 * mu * ux + lam * tr;
    let syy = 2.0 * mu * vy + lam * tr;
    let sxy = mu * (uy + vx);
    (sxx, sxy, syy)
}

#[inline]
fn rusanov_y(law: &GasLaw, l: (f64, f64, f64), r: (f64, f64, f64), a: f64) -> [f64; 3] {
    let (rl, ul, vl) = l;
    let (rr, ur, vr) = r;
    let pl = law.p(rl);
    let pr = law.p(rr);
    [
        0.5 * (rl * vl + rr * vr) - 0.5 * a * (rr - rl),
        0.5 * (rl * ul * vl + rr * ur * vr) - 0.5 * a * (rr * ur - rl * ul),
        0.5 * (rl * vl * vl + pl + rr * vr * vr + pr) - 0.5 * a * (rr * vr - rl * vl),
    ]
}

#[inline]
fn rusanov_x(law: &GasLaw, l: (f64, f64, f64), r: (f64, f64, f64), a: f64) -> [f64; 3] {
    let (rl, ul, vl) = l;
    let (rr, ur, vr) = r;
    let pl = law.p(rl);
    let pr = law.p(rr);
    [
        0.5 * (rl * ul + rr * ur) - 0.5 * a * (rr - rl),
        0.5 * (rl * ul * ul + pl + rr * ur * ur + pr) - 0.5 * a * (rr * ur - rl * ul),
        0.5 * (rl * ul * vl + rr * ur * vr) - 0.5 * a * (rr * vr - rl * vl),
    ]
}

/// Face value in ghosted row `r` at height `yf`, limited in `y`.
#[inline]
fn recon_y(q: &[f64], geo: &Geometry, r: usize, i: usize, yf: f64) -> f64 {
    let nx = geo.nx;
    let y = &geo.yc;
    let qm = q[(r - 1) * nx + i];
    let q0 = q[r * nx + i];
    let qp = q[(r + 1) * nx + i];
    let s = minmod((q0 - qm) / (y[r] - y[r - 1]), (qp - q0) / (y[r + 1] - y[r]));
    q0 + s * (yf - y[r])
}

#[inline]
fn ddx(q: &[f64], nx: usize, r: usize, i: usize, inv2dx: f64) -> f64 {
    let ip = if i + 1 == nx { 0 } else { i + 1 };
    let im = if i == 0 { nx - 1 } else { i - 1 };
    (q[r * nx + ip] - q[r * nx + im]) * inv2dx
}

/// Total (convective minus viscous) flux through each `y` face, `ny + 1` rows.
pub(crate) fn fill_y_fluxes(
    exec: Execution,
    g: &Ghosted,
    geo: &Geometry,
    model: &Model,
    f: &mut [Vec<f64>; 3],
) {
    let nx = geo.nx;
    let ny = geo.ny;
    for v in f.iter_mut() {
        v.resize((ny + 1) * nx, 0.0);
    }
    let inv2dx = 0.5 / geo.dx;
    let eps = model.visc.eps;
    let law = model.law;
    let [f0, f1, f2] = f;
    for_each_row3(exec, f0, f1, f2, nx, |face, a, b, c| {
        let yf = geo.faces[face];
        // ghosted rows below (rl) and above (rr) the face
        let rl = face;
        let rr = face + 1;
        let inv_dy = 1.0 / (geo.yc[rr] - geo.yc[rl]);
        for i in 0..nx {
            let mut flux = if face == 0 || face == ny {
                let r = if face == 0 { 1 } else { ny };
                let rho = recon_y(&g.rho, geo, r, i, yf);
                let v = recon_y(&g.v, geo, r, i, yf);
                let am = g.v[r * nx + i].abs() + g.c[r * nx + i];
                let sign = if face == 0 { -1.0 } else { 1.0 };
                [0.0, 0.0, rho * v * v + law.p(rho) + sign * am * rho * v]
            } else {
                let l = (
                    recon_y(&g.rho, geo, rl, i, yf),
                    recon_y(&g.u, geo, rl, i, yf),
                    recon_y(&g.v, geo, rl, i, yf),
                );
                let r = (
                    recon_y(&g.rho, geo, rr, i, yf),
                    recon_y(&g.u, geo, rr, i, yf),
                    recon_y(&g.v, geo, rr, i, yf),
                );
                let (cl, cr) = (rl * nx + i, rr * nx + i);
                let a = (g.v[cl].abs() + g.c[cl]).max(g.v[cr].abs() + g.c[cr]);
                rusanov_y(&law, l, r, a)
            };
            if model.viscous {
                let uy = (g.u[rr * nx + i] - g.u[rl * nx + i]) * inv_dy;
                let vy = (g.v[rr * nx + i] - g.v[rl * nx + i]) * inv_dy;
                let ux = 0.5 * (ddx(&g.u, nx, rl, i, inv2dx) + ddx(&g.u, nx, rr, i, inv2dx));
                let vx = 0.5 * (ddx(&g.v, nx, rl, i, inv2dx) + ddx(&g.v, nx, rr, i, inv2dx));
                let (_, sxy, syy) = viscous_stress(model, ux, uy, vx, vy);
                flux[1] -= eps * sxy;
                flux[2] -= eps * syy;
            }
            a[i] = flux[0];
            b[i] = flux[1];
            c[i] = flux[2];
        }
    });
}

pub(crate) struct RowInputs<'a> {
    pub g: &'a Ghosted,
    pub geo: &'a Geometry,
    pub model: &'a Model,
    pub dyu: &'a [f64],
    pub dyv: &'a [f64],
    pub fy: &'a [Vec<f64>; 3],
    pub source: Option<&'a dyn Source>,
    pub time: f64,
    pub dt: f64,
}

/// How the update combines with the buffer it writes into.
#[derive(Clone, Copy)]
pub(crate) enum Combine<'a> {
    /// `out += dt L`.
    Forward,
    /// `out = (out + base + dt L) / 2`.
    Average(&'a FluidField),
}

#[inline]
fn x_state(q: &[f64], base: usize, i: usize, im: usize, ip: usize, side: f64) -> f64 {
    let q0 = q[base + i];
    q0 + side * 0.5 * minmod(q0 - q[base + im], q[base + ip] - q0)
}

pub(crate) fn update(
    exec: Execution,
    inp: &RowInputs<'_>,
    out: &mut FluidField,
    mode: Combine<'_>,
) {
    let nx = inp.geo.nx;
    let dx = inp.geo.dx;
    let inv_dx = 1.0 / dx;
    let law = inp.model.law;
    let eps = inp.model.visc.eps;
    let viscous = inp.model.viscous;
    let FluidField { rho, mx, my } = out;
    for_each_row3(exec, rho, mx, my, nx, |j, or, omx, omy| {
        let g = inp.g;
        let r = j + 1;
        let base = r * nx;
        let cell_base = j * nx;
        let y = inp.geo.yc[r];
        let inv_h = 1.0 / inp.geo.heights[j];
        let wrap = |k: isize| -> usize { ((k + nx as isize) % nx as isize) as usize };
        // flux through the face right of column i
        let face = |i: usize| -> [f64; 3] {
            let ip = wrap(i as isize + 1);
            let im = wrap(i as isize - 1);
            let ipp = wrap(i as isize + 2);
            let l = (
                x_state(&g.rho, base, i, im, ip, 1.0),
                x_state(&g.u, base, i, im, ip, 1.0),
                x_state(&g.v, base, i, im, ip, 1.0),
            );
            let rr = (
                x_state(&g.rho, base, ip, i, ipp, -1.0),
                x_state(&g.u, base, ip, i, ipp, -1.0),
                x_state(&g.v, base, ip, i, ipp, -1.0),
            );
            let a =
                (g.u[base + i].abs() + g.c[base + i]).max(g.u[base + ip].abs() + g.c[base + ip]);
            let mut f = rusanov_x(&law, l, rr, a);
            if viscous {
                let ux = (g.u[base + ip] - g.u[base + i]) * inv_dx;
                let vx = (g.v[base + ip] - g.v[base + i]) * inv_dx;
                let uy = 0.5 * (inp.dyu[cell_base + i] + inp.dyu[cell_base + ip]);
                let vy = 0.5 * (inp.dyv[cell_base + i] + inp.dyv[cell_base + ip]);
                let (sxx, sxy, _) = viscous_stress(inp.model, ux, uy, vx, vy);
                f[1] -= eps * sxx;
                f[2] -= eps * sxy;
            }
            f
        };
        let mut left = face(nx - 1);
        for i in 0..nx {
            let right = face(i);
            let c = cell_base + i;
            let fb = cell_base + i;
            let ft = fb + nx;
            let mut l = [0.0; 3];
            for k in 0..3 {
                l[k] = -(right[k] - left[k]) * inv_dx - (inp.fy[k][ft] - inp.fy[k][fb]) * inv_h;
            }
            if let Some(src) = inp.source {
                let s = src.eval(inp.time, (i as f64 + 0.5) * dx, y);
                for k in 0..3 {
                    l[k] += s[k];
                }
            }
            match mode {
                Combine::Forward => {
                    or[i] += inp.dt * l[0];
                    omx[i] += inp.dt * l[1];
                    omy[i] += inp.dt * l[2];
                }
                Combine::Average(b) => {
                    or[i] = 0.5 * (or[i] + b.rho[c] + inp.dt * l[0]);
                    omx[i] = 0.5 * (omx[i] + b.mx[c] + inp.dt * l[1]);
                    omy[i] = 0.5 * (omy[i] + b.my[c] + inp.dt * l[2]);
                }
            }
            left = right;
        }
    });
}
