//! Smooth solutions of the compressible Euler system on the channel, used as
//! the comparison pair `(rho_E, u_E)`, and residual checks for the identities
//! the diagnostics rely on.

use serde::{Deserialize, Serialize};

use crate::domain::{lp_norm, ChannelGrid, VectorField};
use crate::error::{invalid, Result};
use crate::tensor::Tensor2;
use crate::thermo::GasLaw;

/// A smooth Euler pair with analytic derivatives. Velocity gradients follow
/// `G_ij = d u_i / d x_j`.
pub trait EulerReference: Send + Sync {
    fn name(&self) -> String;
    fn density(&self, t: f64, x: f64, y: f64) -> f64;
    fn density_grad(&self, t: f64, x: f64, y: f64) -> [f64; 2];
    fn density_dt(&self, t: f64, x: f64, y: f64) -> f64;
    fn velocity(&self, t: f64, x: f64, y: f64) -> [f64; 2];
    fn velocity_grad(&self, t: f64, x: f64, y: f64) -> Tensor2;
    fn velocity_dt(&self, t: f64, x: f64, y: f64) -> [f64; 2];
    /// `(inf, sup)` of the density over `[0, t_final] x Omega`.
    fn density_bounds(&self, t_final: f64) -> (f64, f64);
    fn is_steady(&self) -> bool {
        false
    }
}

/// Wall-parallel velocity profile `U(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    /// `U = value`.
    Plug { value: f64 },
    /// `U = offset + amplitude sin(pi y)`.
    Sine { offset: f64, amplitude: f64 },
    /// `U = offset + amplitude tanh((y - 1/2) / width)`.
    Tanh {
        offset: f64,
        amplitude: f64,
        width: f64,
    },
}

impl Profile {
    /// Default parameters for `plug`, `sine`, `tanh`, or `rest` (zero plug).
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "plug" => Profile::Plug { value: 1.0 },
            "rest" => Profile::Plug { value: 0.0 },
            "sine" => Profile::Sine {
                offset: 0.5,
                amplitude: 0.5,
            },
            "tanh" => Profile::Tanh {
                offset: 0.5,
                amplitude: 0.5,
                width: 0.2,
            },
            other => {
                return Err(invalid(
                    "reference",
                    format!("unknown profile {other:?} (plug, rest, sine, tanh)"),
                ))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Plug { .. } => "plug",
            Profile::Sine { .. } => "sine",
            Profile::Tanh { .. } => "tanh",
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        match *self {
            Profile::Plug { value } => value,
            Profile::Sine { offset, amplitude } => {
                offset + amplitude * (std::f64::consts::PI * y).sin()
            }
            Profile::Tanh {
                offset,
                amplitude,
                width,
            } => offset + amplitude * ((y - 0.5) / width).tanh(),
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Profile::Plug { .. } => 0.0,
            Profile::Sine { amplitude, .. } => amplitude * PI * (PI * y).cos(),
            Profile::Tanh {
                amplitude, width, ..
            } => {
                let s = 1.0 / ((y - 0.5) / width).cosh();
                amplitude * s * s / width
            }
        }
    }
}

/// Steady parallel flow `(1, (U(y), 0))`, an exact Euler solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShearFlow {
    pub profile: Profile,
}

pub fn shear_flow(profile: Profile) -> ShearFlow {
    ShearFlow { profile }
}

impl EulerReference for ShearFlow {
    fn name(&self) -> String {
        self.profile.name().to_string()
    }
    fn density(&self, _t: f64, _x: f64, _y: f64) -> f64 {
        1.0
    }
    fn density_grad(&self, _t: f64, _x: f64, _y: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn density_dt(&self, _t: f64, _x: f64, _y: f64) -> f64 {
        0.0
    }
    fn velocity(&self, _t: f64, _x: f64, y: f64) -> [f64; 2] {
        [self.profile.value(y), 0.0]
    }
    fn velocity_grad(&self, _t: f64, _x: f64, y: f64) -> Tensor2 {
        Tensor2::new2([0.0, self.profile.derivative(y)], [0.0, 0.0])
    }
    fn velocity_dt(&self, _t: f64, _x: f64, _y: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn density_bounds(&self, _t_final: f64) -> (f64, f64) {
        (1.0, 1.0)
    }
    fn is_steady(&self) -> bool {
        true
    }
}

/// Cell-center samples of the reference at time `t`.
#[derive(Debug, Clone)]
pub struct SampledReference {
    pub density: Vec<f64>,
    pub density_grad: Vec<[f64; 2]>,
    pub density_dt: Vec<f64>,
    pub velocity: VectorField,
    pub velocity_grad: Vec<Tensor2>,
    pub velocity_dt: VectorField,
}

pub fn sample(reference: &dyn EulerReference, grid: &ChannelGrid, t: f64) -> SampledReference {
    let n = grid.cells();
    let mut s = SampledReference {
        density: vec![0.0; n],
        density_grad: vec![[0.0; 2]; n],
        density_dt: vec![0.0; n],
        velocity: VectorField::zeros(grid),
        velocity_grad: vec![Tensor2::zero(); n],
        velocity_dt: VectorField::zeros(grid),
    };
    for j in 0..grid.ny() {
        let y = grid.y_center(j);
        for i in 0..grid.nx() {
            let x = grid.x_center(i);
            let c = grid.idx(i, j);
            s.density[c] = reference.density(t, x, y);
            s.density_grad[c] = reference.density_grad(t, x, y);
            s.density_dt[c] = reference.density_dt(t, x, y);
            let [u, v] = reference.velocity(t, x, y);
            s.velocity.x[c] = u;
            s.velocity.y[c] = v;
            s.velocity_grad[c] = reference.velocity_grad(t, x, y);
            let [a, b] = reference.velocity_dt(t, x, y);
            s.velocity_dt.x[c] = a;
            s.velocity_dt.y[c] = b;
        }
    }
    s
}

/// Pointwise residuals: mass, momentum (2), recast momentum (2), `H'` transport.
fn pointwise(reference: &dyn EulerReference, law: GasLaw, t: f64, x: f64, y: f64) -> [f64; 6] {
    let rho = reference.density(t, x, y);
    let gr = reference.density_grad(t, x, y);
    let drho = reference.density_dt(t, x, y);
    let u = reference.velocity(t, x, y);
    let g = reference.velocity_grad(t, x, y);
    let du = reference.velocity_dt(t, x, y);
    let div = g.trace();
    let mass = drho + gr[0] * u[0] + gr[1] * u[1] + rho * div;
    let adv = g.apply(u);
    let dp = law.dpressure(rho);
    let mom = [
        rho * (du[0] + adv[0]) + dp * gr[0],
        rho * (du[1] + adv[1]) + dp * gr[1],
    ];
    // grad H'(rho) = H''(rho) grad rho
    let h2 = law.second_derivative_h(rho);
    let recast = [du[0] + adv[0] + h2 * gr[0], du[1] + adv[1] + h2 * gr[1]];
    let heq = h2 * (drho + u[0] * gr[0] + u[1] * gr[1]) + div * dp;
    [mass, mom[0], mom[1], recast[0], recast[1], heq]
}

fn residual_fields(
    reference: &dyn EulerReference,
    grid: &ChannelGrid,
    law: GasLaw,
    t: f64,
) -> [Vec<f64>; 6] {
    let n = grid.cells();
    let mut out: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let c = grid.idx(i, j);
            let r = pointwise(reference, law, t, grid.x_center(i), grid.y_center(j));
            for k in 0..6 {
                out[k][c] = r[k];
            }
        }
    }
    out
}

fn l2_pair(a: &[f64], b: &[f64], grid: &ChannelGrid) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(p, q)| p.hypot(*q)).collect();
    lp_norm(&sq, grid, 2.0, None)
}

/// Discrete `L^2` norms of the mass and momentum residuals at time `t`.
pub fn euler_residual(
    reference: &dyn EulerReference,
    grid: &ChannelGrid,
    law: GasLaw,
    t: f64,
) -> (f64, f64) {
    let r = residual_fields(reference, grid, law, t);
    (lp_norm(&r[0], grid, 2.0, None), l2_pair(&r[1], &r[2], grid))
}

/// Discrete `L^2` norms of `dt u + (u.grad)u + grad H'(rho)` and
/// `dt H'(rho) + u.grad H'(rho) + div(u) p'(rho)`.
pub fn recast_identities_residual(
    reference: &dyn EulerReference,
    grid: &ChannelGrid,
    law: GasLaw,
    t: f64,
) -> (f64, f64) {
    let r = residual_fields(reference, grid, law, t);
    (l2_pair(&r[3], &r[4], grid), lp_norm(&r[5], grid, 2.0, None))
}

/// Maximum of `|u . n|` over the wall faces of the grid at time `t`.
pub fn wall_normal_velocity(reference: &dyn EulerReference, grid: &ChannelGrid, t: f64) -> f64 {
    (0..grid.nx())
        .flat_map(|i| {
            let x = grid.x_center(i);
            [
                reference.velocity(t, x, 0.0)[1],
                reference.velocity(t, x, 1.0)[1],
            ]
        })
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// Reference with a density bump added; not an Euler solution. Used to
/// exercise the residual checks.
#[derive(Debug, Clone, Copy)]
pub struct DensityPerturbed<R> {
    pub base: R,
    pub amplitude: f64,
    pub length_x: f64,
}

impl<R: EulerReference> EulerReference for DensityPerturbed<R> {
    fn name(&self) -> String {
        format!("{}+bump", self.base.name())
    }
    fn density(&self, t: f64, x: f64, y: f64) -> f64 {
        let k = 2.0 * std::f64::consts::PI / self.length_x;
        self.base.density(t, x, y) + self.amplitude * (k * x).sin()
    }
    fn density_grad(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let k = 2.0 * std::f64::consts::PI / self.length_x;
        let g = self.base.density_grad(t, x, y);
        [g[0] + self.amplitude * k * (k * x).cos(), g[1]]
    }
    fn density_dt(&self, t: f64, x: f64, y: f64) -> f64 {
        self.base.density_dt(t, x, y)
    }
    fn velocity(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        self.base.velocity(t, x, y)
    }
    fn velocity_grad(&self, t: f64, x: f64, y: f64) -> Tensor2 {
        self.base.velocity_grad(t, x, y)
    }
    fn velocity_dt(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        self.base.velocity_dt(t, x, y)
    }
    fn density_bounds(&self, t_final: f64) -> (f64, f64) {
        let (lo, hi) = self.base.density_bounds(t_final);
        (lo - self.amplitude.abs(), hi + self.amplitude.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> GasLaw {
        GasLaw::new(5.0 / 3.0).unwrap()
    }

    #[test]
    fn shear_profiles_are_exact() {
        let g = ChannelGrid::build(2.0, 8, 32, 2.0).unwrap();
        for name in ["plug", "rest", "sine", "tanh"] {
            let r = shear_flow(Profile::from_name(name).unwrap());
            let (m, p) = euler_residual(&r, &g, law(), 0.3);
            let (a, b) = recast_identities_residual(&r, &g, law(), 0.3);
            assert!(
                m <= 1e-12 && p <= 1e-12 && a <= 1e-12 && b <= 1e-12,
                "{name}"
            );
            assert_eq!(wall_normal_velocity(&r, &g, 0.0), 0.0);
            assert_eq!(r.density_bounds(1.0), (1.0, 1.0));
        }
        assert!(Profile::from_name("poiseuille").is_err());
    }

    #[test]
    fn profile_derivatives_match_differences() {
        for name in ["sine", "tanh"] {
            let p = Profile::from_name(name).unwrap();
            for k in 1..10 {
                let y = k as f64 / 10.0;
                let h = 1e-5;
                let fd = (p.value(y + h) - p.value(y - h)) / (2.0 * h);
                assert!((fd - p.derivative(y)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn perturbed_density_is_not_a_solution() {
        let g = ChannelGrid::uniform(1.0, 16, 16).unwrap();
        let r = DensityPerturbed {
            base: shear_flow(Profile::from_name("plug").unwrap()),
            amplitude: 0.1,
            length_x: 1.0,
        };
        let (m, p) = euler_residual(&r, &g, law(), 0.0);
        assert!(m > 0.1 && p > 0.1);
        let (a, b) = recast_identities_residual(&r, &g, law(), 0.0);
        assert!(a > 0.0 && b > 0.0);
    }
}
