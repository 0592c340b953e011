//! Viscous stress `S(G) = mu (G + G^T - 2/3 tr G Id) + eta tr G Id`, the
//! contraction `S(G):G` and a measured coercivity constant on the channel.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{gradient, ChannelGrid, VectorField};
use crate::error::{invalid, Error, Result};
use crate::exec::{map_collect, Execution};

/// Square `D x D` matrix; `m[i][j] = d u_i / d x_j` when it holds a velocity gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor<const D: usize>(pub [[f64; D]; D]);

pub type Tensor2 = Tensor<2>;
pub type Tensor3 = Tensor<3>;

/// A velocity gradient.
pub type GradientTensor<const D: usize> = Tensor<D>;

impl<const D: usize> Default for Tensor<D> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const D: usize> Tensor<D> {
    pub const fn zero() -> Self {
        Tensor([[0.0; D]; D])
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; D]; D];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Tensor(m)
    }

    pub fn trace(&self) -> f64 {
        (0..D).map(|i| self.0[i][i]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut m = [[0.0; D]; D];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[j][i];
            }
        }
        Tensor(m)
    }

    /// Frobenius pairing `A : B`.
    pub fn dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            for j in 0..D {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// `(a ⊗ b)_{ij} = a_i b_j`.
    pub fn outer(a: [f64; D], b: [f64; D]) -> Self {
        let mut m = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..D {
                m[i][j] = a[i] * b[j];
            }
        }
        Tensor(m)
    }

    /// `M v`.
    pub fn apply(&self, v: [f64; D]) -> [f64; D] {
        let mut out = [0.0; D];
        for i in 0..D {
            out[i] = (0..D).map(|j| self.0[i][j] * v[j]).sum();
        }
        out
    }
}

impl<const D: usize> Add for Tensor<D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] += rhs.0[i][j];
            }
        }
        self
    }
}

impl<const D: usize> Sub for Tensor<D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl<const D: usize> Mul<Tensor<D>> for f64 {
    type Output = Tensor<D>;
    fn mul(self, mut rhs: Tensor<D>) -> Tensor<D> {
        rhs.0.iter_mut().flatten().for_each(|v| *v *= self);
        rhs
    }
}

/// `mu`, `eta`, the viscosity scale `eps` and the wall friction `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityParams {
    pub mu: f64,
    pub eta: f64,
    pub eps: f64,
    pub beta: f64,
}

impl ViscosityParams {
    pub fn new(mu: f64, eta: f64, eps: f64, beta: f64) -> Result<Self> {
        let v = Self { mu, eta, eps, beta };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", format!("{} must be > 0", self.mu)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta", format!("{} must be >= 0", self.eta)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid("eps", format!("{} must be > 0", self.eps)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", format!("{} must be >= 0", self.beta)));
        }
        Ok(())
    }
}

/// `S(G)`; symmetric by construction. Uses the 2/3 deviatoric coefficient in
/// every dimension.
pub fn stress<const D: usize>(grad: &Tensor<D>, visc: &ViscosityParams) -> Tensor<D> {
    stress_mu_eta(grad, visc.mu, visc.eta)
}

#[inline]
pub(crate) fn stress_mu_eta<const D: usize>(grad: &Tensor<D>, mu: f64, eta: f64) -> Tensor<D> {
    let tr = grad.trace();
    let diag = (eta - 2.0 * mu / 3.0) * tr;
    let mut m = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..D {
            m[i][j] = mu * (grad.0[i][j] + grad.0[j][i]);
        }
        m[i][i] += diag;
    }
    Tensor(m)
}

/// `S(G):G = mu/2 sum (G_ij + G_ji)^2 + (eta - 2 mu/3) (tr G)^2`.
pub fn stress_contraction<const D: usize>(grad: &Tensor<D>, visc: &ViscosityParams) -> f64 {
    contraction_mu_eta(grad, visc.mu, visc.eta)
}

#[inline]
pub(crate) fn contraction_mu_eta<const D: usize>(grad: &Tensor<D>, mu: f64, eta: f64) -> f64 {
    let mut sym = 0.0;
    for i in 0..D {
        for j in 0..D {
            let s = grad.0[i][j] + grad.0[j][i];
            sym += s * s;
        }
    }
    let tr = grad.trace();
    0.5 * mu * sym + (eta - 2.0 * mu / 3.0) * tr * tr
}

/// Generates random velocity fields on the channel that vanish on both walls.
pub trait VelocitySampler: Sync {
    fn sample(&self, grid: &ChannelGrid, rng: &mut ChaCha8Rng) -> VectorField;
}

/// Random combinations of `sin(k pi y) {cos, sin}(2 pi m x / L)` for each
/// velocity component, `k = 1..=wall_modes`, `m = 0..=periodic_modes`.
#[derive(Debug, Clone, Copy)]
pub struct WallModeSampler {
    pub wall_modes: usize,
    pub periodic_modes: usize,
}

impl Default for WallModeSampler {
    fn default() -> Self {
        Self {
            wall_modes: 4,
            periodic_modes: 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    component: usize,
    k: usize,
    m: usize,
    sine: bool,
}

impl WallModeSampler {
    fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::new();
        for component in 0..2 {
            for k in 1..=self.wall_modes {
                for m in 0..=self.periodic_modes {
                    out.push(Mode {
                        component,
                        k,
                        m,
                        sine: false,
                    });
                    if m > 0 {
                        out.push(Mode {
                            component,
                            k,
                            m,
                            sine: true,
                        });
                    }
                }
            }
        }
        out
    }

    fn mode_field(grid: &ChannelGrid, mode: Mode) -> VectorField {
        let mut f = VectorField::zeros(grid);
        let lx = grid.length_x();
        for j in 0..grid.ny() {
            let wy = (mode.k as f64 * std::f64::consts::PI * grid.y_center(j)).sin();
            for i in 0..grid.nx() {
                let arg = 2.0 * std::f64::consts::PI * mode.m as f64 * grid.x_center(i) / lx;
                let wx = if mode.sine { arg.sin() } else { arg.cos() };
                let c = grid.idx(i, j);
                if mode.component == 0 {
                    f.x[c] = wy * wx;
                } else {
                    f.y[c] = wy * wx;
                }
            }
        }
        f
    }

    fn combine(grid: &ChannelGrid, modes: &[Mode], coeffs: &[f64]) -> VectorField {
        let mut f = VectorField::zeros(grid);
        for (mode, &a) in modes.iter().zip(coeffs) {
            let g = Self::mode_field(grid, *mode);
            for c in 0..grid.cells() {
                f.x[c] += a * g.x[c];
                f.y[c] += a * g.y[c];
            }
        }
        f
    }
}

impl VelocitySampler for WallModeSampler {
    fn sample(&self, grid: &ChannelGrid, rng: &mut ChaCha8Rng) -> VectorField {
        let modes = self.modes();
        let coeffs: Vec<f64> = modes.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self::combine(grid, &modes, &coeffs)
    }
}

/// Discrete `int S(grad u):grad u` and `int |grad u|^2` of a sampled field.
pub fn dissipation_pair(
    field: &VectorField,
    grid: &ChannelGrid,
    visc: &ViscosityParams,
) -> (f64, f64) {
    let g = gradient(field, grid);
    let mut num = 0.0;
    let mut den = 0.0;
    for (c, gc) in g.iter().enumerate() {
        let vol = grid.cell_volume(c);
        num += vol * stress_contraction(gc, visc);
        den += vol * gc.norm_sq();
    }
    (num, den)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityEstimate {
    /// Minimum ratio over the retained trials.
    pub c0: f64,
    pub ratios: Vec<f64>,
    pub discarded: usize,
}

/// Minimum over `trials` random wall-vanishing fields of
/// `int S(grad u):grad u / int |grad u|^2`. Trial `k` uses seed `seed + k`;
/// the reduction runs in trial order.
pub fn estimate_coercivity(
    sampler: &dyn VelocitySampler,
    grid: &ChannelGrid,
    visc: &ViscosityParams,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<CoercivityEstimate> {
    if trials < 10 {
        return Err(invalid("trials", format!("{trials} < 10")));
    }
    let per_trial = map_collect(exec, trials, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let field = sampler.sample(grid, &mut rng);
        let (num, den) = dissipation_pair(&field, grid, visc);
        if den > 1e-300 && den.is_finite() {
            Some(num / den)
        } else {
            None
        }
    });
    let discarded = per_trial.iter().filter(|r| r.is_none()).count();
    let ratios: Vec<f64> = per_trial.into_iter().flatten().collect();
    if ratios.is_empty() {
        return Err(Error::NoValidSamples(
            "every coercivity trial had zero gradient",
        ));
    }
    let c0 = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CoercivityEstimate {
        c0,
        ratios,
        discarded,
    })
}

/// Smallest generalized eigenvalue of the discrete pair
/// `(int S(grad u):grad v, int grad u : grad v)` restricted to the span of the
/// sampler's modes. Every trial ratio is bounded below by it.
pub fn coercivity_floor(
    sampler: &WallModeSampler,
    grid: &ChannelGrid,
    visc: &ViscosityParams,
) -> Result<f64> {
    let modes = sampler.modes();
    let grads: Vec<Vec<Tensor2>> = modes
        .iter()
        .map(|m| gradient(&WallModeSampler::mode_field(grid, *m), grid))
        .collect();
    let n = modes.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let mut sa = 0.0;
            let mut sb = 0.0;
            for c in 0..grid.cells() {
                let vol = grid.cell_volume(c);
                sa += vol * stress(&grads[p][c], visc).dot(&grads[q][c]);
                sb += vol * grads[p][c].dot(&grads[q][c]);
            }
            a[(p, q)] = sa;
            a[(q, p)] = sa;
            b[(p, q)] = sb;
            b[(q, p)] = sb;
        }
    }
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::Internal("gradient Gram matrix is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Internal("singular Cholesky factor".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig = c.symmetric_eigen();
    Ok(eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn visc(mu: f64, eta: f64) -> ViscosityParams {
        ViscosityParams::new(mu, eta, 1.0, 0.0).unwrap()
    }

    #[test]
    fn stress_of_zero_and_antisymmetric() {
        let v = visc(1.3, 0.4);
        assert_eq!(stress(&Tensor3::zero(), &v), Tensor3::zero());
        let a = Tensor([[0.0, 2.0, -1.0], [-2.0, 0.0, 0.5], [1.0, -0.5, 0.0]]);
        assert!(stress(&a, &v).norm_sq() < 1e-28);
        assert!(stress_contraction(&a, &v).abs() < 1e-14);
    }

    #[test]
    fn identity_in_three_dimensions() {
        let v = visc(1.0, 1.0);
        let s = stress(&Tensor3::identity(), &v);
        assert!((s - 3.0 * Tensor3::identity()).norm_sq() < 1e-28);
        assert!((stress_contraction(&Tensor3::identity(), &v) - 9.0).abs() < 1e-14);
    }

    #[test]
    fn stress_is_symmetric() {
        let g = Tensor([[0.3, -1.2], [0.7, 2.0]]);
        let s = stress(&g, &visc(0.8, 0.1));
        assert_eq!(s.0[0][1], s.0[1][0]);
    }

    #[test]
    fn rejects_bad_viscosity() {
        assert!(ViscosityParams::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(ViscosityParams::new(1.0, -0.1, 1.0, 0.0).is_err());
        assert!(ViscosityParams::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ViscosityParams::new(1.0, 0.0, 1.0, -1.0).is_err());
    }

    struct Constant;
    impl VelocitySampler for Constant {
        fn sample(&self, grid: &ChannelGrid, _rng: &mut ChaCha8Rng) -> VectorField {
            let mut f = VectorField::zeros(grid);
            f.x.iter_mut().for_each(|v| *v = 2.0);
            f
        }
    }

    #[test]
    fn constant_fields_are_discarded() {
        let grid = ChannelGrid::uniform(1.0, 8, 8).unwrap();
        let r = estimate_coercivity(
            &Constant,
            &grid,
            &visc(1.0, 0.0),
            10,
            0,
            Execution::Sequential,
        );
        assert!(matches!(r, Err(Error::NoValidSamples(_))));
    }

    #[test]
    fn single_mode_ratio_is_positive() {
        let grid = ChannelGrid::uniform(1.0, 16, 32).unwrap();
        let mut f = VectorField::zeros(&grid);
        for j in 0..grid.ny() {
            let y = grid.y_center(j);
            let s = y * (1.0 - y);
            for i in 0..grid.nx() {
                f.x[grid.idx(i, j)] = (2.0 * std::f64::consts::PI * y).sin() * s;
            }
        }
        let (num, den) = dissipation_pair(&f, &grid, &visc(1.0, 0.0));
        assert!(num / den > 0.0);
    }

    #[test]
    fn divergence_free_trial_above_half_mu() {
        // Stream function psi = sin^2(pi y) cos(2 pi x): u = d_y psi, v = -d_x psi.
        let grid = ChannelGrid::uniform(1.0, 32, 32).unwrap();
        let pi = std::f64::consts::PI;
        let mut f = VectorField::zeros(&grid);
        for j in 0..grid.ny() {
            let y = grid.y_center(j);
            for i in 0..grid.nx() {
                let x = grid.x_center(i);
                let c = grid.idx(i, j);
                f.x[c] = 2.0 * pi * (pi * y).sin() * (pi * y).cos() * (2.0 * pi * x).cos();
                f.y[c] = 2.0 * pi * (pi * y).sin().powi(2) * (2.0 * pi * x).sin();
            }
        }
        let (num, den) = dissipation_pair(&f, &grid, &visc(1.0, 2.0 / 3.0));
        assert!(num / den >= 0.5, "ratio {}", num / den);
    }

    #[test]
    fn floor_bounds_trials_from_below() {
        let grid = ChannelGrid::uniform(1.0, 16, 16).unwrap();
        let v = visc(1.0, 0.0);
        let sampler = WallModeSampler::default();
        let floor = coercivity_floor(&sampler, &grid, &v).unwrap();
        let est = estimate_coercivity(&sampler, &grid, &v, 20, 3, Execution::Sequential).unwrap();
        assert!(floor > 0.0);
        assert!(est.c0 >= floor * (1.0 - 1e-12), "{} < {}", est.c0, floor);
    }
}
