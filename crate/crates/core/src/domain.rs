//! The periodic channel `[0, L) x [0, 1]` with symmetric tanh wall grading,
//! wall distance, boundary strips, discrete norms and gradients.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor2;

/// Periodic in `x`, walls at `y = 0` and `y = 1`. Cell `(i, j)` is stored at
/// `j * nx + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGrid {
    length_x: f64,
    nx: usize,
    ny: usize,
    stretch_ratio: f64,
    y_faces: Vec<f64>,
    y_centers: Vec<f64>,
    heights: Vec<f64>,
    #[serde(skip)]
    dy_stencil: Vec<Stencil>,
}

/// Three-point first-derivative stencil in `y` at a cell center.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Stencil {
    pub rows: [usize; 3],
    pub w: [f64; 3],
}

/// Derivative at `t` of the quadratic through `(t0, t1, t2)`.
pub(crate) fn lagrange_d1(t: f64, t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    [
        (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2)),
        (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2)),
        (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1)),
    ]
}

/// Tanh parameter `delta` for a given center/wall height ratio `cosh^2(delta/2)`.
fn delta_for_stretch(stretch: f64) -> f64 {
    2.0 * stretch.sqrt().acosh()
}

fn tanh_faces(ny: usize, stretch: f64) -> Vec<f64> {
    let delta = delta_for_stretch(stretch);
    let mut faces = vec![0.0; ny + 1];
    for k in 0..=ny / 2 {
        let s = k as f64 / ny as f64;
        let y = if delta < 1e-8 {
            s
        } else {
            0.5 * (1.0 + (delta * (s - 0.5)).tanh() / (0.5 * delta).tanh())
        };
        faces[k] = y;
        faces[ny - k] = 1.0 - y;
    }
    faces[0] = 0.0;
    faces[ny] = 1.0;
    if ny.is_multiple_of(2) {
        faces[ny / 2] = 0.5;
    }
    faces
}

impl ChannelGrid {
    /// Symmetric tanh grading; `stretch_ratio` is the (continuous) ratio of
    /// the channel-center to wall cell height, 1 meaning uniform.
    pub fn build(length_x: f64, nx: usize, ny: usize, stretch_ratio: f64) -> Result<Self> {
        if !(stretch_ratio >= 1.0 && stretch_ratio.is_finite()) {
            return Err(invalid(
                "stretch_ratio",
                format!("{stretch_ratio} must be >= 1"),
            ));
        }
        if ny < 4 {
            return Err(invalid("ny", format!("{ny} < 4")));
        }
        let mut g = Self::from_faces(length_x, nx, tanh_faces(ny, stretch_ratio))?;
        g.stretch_ratio = stretch_ratio;
        Ok(g)
    }

    pub fn uniform(length_x: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::build(length_x, nx, ny, 1.0)
    }

    /// Arbitrary wall-normal faces from 0 to 1.
    pub fn from_faces(length_x: f64, nx: usize, y_faces: Vec<f64>) -> Result<Self> {
        if !(length_x > 0.0 && length_x.is_finite()) {
            return Err(invalid("length_x", format!("{length_x} must be > 0")));
        }
        if nx < 4 {
            return Err(invalid("nx", format!("{nx} < 4")));
        }
        let ny = y_faces.len().saturating_sub(1);
        if ny < 4 {
            return Err(invalid("ny", format!("{ny} < 4")));
        }
        if y_faces[0] != 0.0 || y_faces[ny] != 1.0 {
            return Err(Error::Internal("faces must run from 0 to 1".into()));
        }
        if y_faces.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Internal(
                "face array is not strictly increasing".into(),
            ));
        }
        let y_centers: Vec<f64> = y_faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let heights: Vec<f64> = y_faces.windows(2).map(|w| w[1] - w[0]).collect();
        let mut g = Self {
            length_x,
            nx,
            ny,
            stretch_ratio: f64::NAN,
            y_faces,
            y_centers,
            heights,
            dy_stencil: Vec::new(),
        };
        g.stretch_ratio = g.heights[ny / 2] / g.heights[0];
        g.dy_stencil = g.make_stencils();
        Ok(g)
    }

    fn make_stencils(&self) -> Vec<Stencil> {
        let yc = &self.y_centers;
        let n = self.ny;
        (0..n)
            .map(|j| {
                let rows = if j == 0 {
                    [0, 1, 2]
                } else if j == n - 1 {
                    [n - 3, n - 2, n - 1]
                } else {
                    [j - 1, j, j + 1]
                };
                Stencil {
                    rows,
                    w: lagrange_d1(yc[j], yc[rows[0]], yc[rows[1]], yc[rows[2]]),
                }
            })
            .collect()
    }

    /// Grid with the given `ny` whose wall cell height does not exceed
    /// `max_wall_height`. Solves for the tanh stretch by bisection.
    pub fn with_wall_height(
        length_x: f64,
        nx: usize,
        ny: usize,
        max_wall_height: f64,
    ) -> Result<Self> {
        let stretch = solve_stretch(ny, max_wall_height)?;
        Self::build(length_x, nx, ny, stretch)
    }

    pub fn length_x(&self) -> f64 {
        self.length_x
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn stretch_ratio(&self) -> f64 {
        self.stretch_ratio
    }
    pub fn dx(&self) -> f64 {
        self.length_x / self.nx as f64
    }
    pub fn y_faces(&self) -> &[f64] {
        &self.y_faces
    }
    pub fn y_centers(&self) -> &[f64] {
        &self.y_centers
    }
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }
    pub fn wall_height(&self) -> f64 {
        self.heights[0].min(self.heights[self.ny - 1])
    }
    pub(crate) fn stencil(&self, j: usize) -> &Stencil {
        &self.dy_stencil[j]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }
    #[inline]
    pub fn y_center(&self, j: usize) -> f64 {
        self.y_centers[j]
    }
    #[inline]
    pub fn row_of(&self, c: usize) -> usize {
        c / self.nx
    }
    #[inline]
    pub fn cell_volume(&self, c: usize) -> f64 {
        self.dx() * self.heights[c / self.nx]
    }
    #[inline]
    pub fn row_volume(&self, j: usize) -> f64 {
        self.dx() * self.heights[j]
    }
    /// `d_Omega` at the center of row `j`.
    #[inline]
    pub fn row_distance(&self, j: usize) -> f64 {
        let y = self.y_centers[j];
        y.min(1.0 - y)
    }
    #[inline]
    pub fn distance(&self, c: usize) -> f64 {
        self.row_distance(c / self.nx)
    }
    /// Outward unit normal of the nearer wall, `-e_y` in the lower half.
    #[inline]
    pub fn row_normal(&self, j: usize) -> [f64; 2] {
        if self.y_centers[j] < 0.5 {
            [0.0, -1.0]
        } else {
            [0.0, 1.0]
        }
    }
    pub fn total_volume(&self) -> f64 {
        (0..self.ny).map(|j| self.row_volume(j)).sum::<f64>() * self.nx as f64
    }

    /// Number of rows next to the lower wall whose centers lie within `width`.
    pub fn rows_within(&self, width: f64) -> usize {
        (0..self.ny)
            .take_while(|&j| self.y_centers[j] < width)
            .count()
    }

    /// Fails unless each wall has at least `required` cell centers in the strip.
    pub fn check_resolves(&self, width: f64, required: usize) -> Result<()> {
        let bottom = self.rows_within(width);
        let top = (0..self.ny)
            .rev()
            .take_while(|&j| 1.0 - self.y_centers[j] < width)
            .count();
        let cells = bottom.min(top);
        if cells < required {
            return Err(Error::UnresolvedStrip {
                width,
                cells,
                required,
            });
        }
        Ok(())
    }
}

fn wall_height_for(ny: usize, stretch: f64) -> f64 {
    tanh_faces(ny, stretch)[1]
}

/// Smallest tanh stretch (to bisection tolerance) whose wall cell is at most
/// `target` high.
pub fn solve_stretch(ny: usize, target: f64) -> Result<f64> {
    if ny < 4 {
        return Err(invalid("ny", format!("{ny} < 4")));
    }
    if !(target > 0.0) {
        return Err(invalid("max_wall_height", format!("{target} must be > 0")));
    }
    if wall_height_for(ny, 1.0) <= target {
        return Ok(1.0);
    }
    let mut lo = 1.0_f64;
    let mut hi = 4.0_f64;
    while wall_height_for(ny, hi) > target {
        hi *= 4.0;
        if hi > 1e12 {
            return Err(invalid(
                "max_wall_height",
                format!("{target} unreachable with ny = {ny}"),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if wall_height_for(ny, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Grid whose strip of the given `width` holds at least `cells` rows next to
/// each wall and whose wall cell is at most `width / cells` high. Uses the
/// smallest tanh stretch meeting both.
pub fn resolve_strip(
    length_x: f64,
    nx: usize,
    ny: usize,
    width: f64,
    cells: usize,
) -> Result<ChannelGrid> {
    if !(width > 0.0 && width < 0.5) {
        return Err(Error::StripNotWellDefined { width });
    }
    let ok = |s: f64| -> Result<bool> {
        let g = ChannelGrid::build(length_x, nx, ny, s)?;
        Ok(g.rows_within(width) >= cells && g.wall_height() <= width / cells as f64)
    };
    let mut lo = 1.0_f64;
    if ok(lo)? {
        return ChannelGrid::build(length_x, nx, ny, lo);
    }
    let mut hi = solve_stretch(ny, width / cells as f64)?.max(2.0);
    while !ok(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::UnresolvedStrip {
                width,
                cells: ChannelGrid::build(length_x, nx, ny, lo)?.rows_within(width),
                required: cells,
            });
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    let g = ChannelGrid::build(length_x, nx, ny, hi)?;
    g.check_resolves(width, cells)?;
    Ok(g)
}

pub fn build_grid(length_x: f64, nx: usize, ny: usize, stretch_ratio: f64) -> Result<ChannelGrid> {
    ChannelGrid::build(length_x, nx, ny, stretch_ratio)
}

/// Two-component cell field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &ChannelGrid) -> Self {
        Self {
            x: vec![0.0; grid.cells()],
            y: vec![0.0; grid.cells()],
        }
    }

    pub fn from_fn(grid: &ChannelGrid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut v = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let c = grid.idx(i, j);
                let [a, b] = f(grid.x_center(i), grid.y_center(j));
                v.x[c] = a;
                v.y[c] = b;
            }
        }
        v
    }

    #[inline]
    pub fn at(&self, c: usize) -> [f64; 2] {
        [self.x[c], self.y[c]]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| a.hypot(*b))
            .collect()
    }
}

pub fn scalar_from_fn(grid: &ChannelGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut v = vec![0.0; grid.cells()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            v[grid.idx(i, j)] = f(grid.x_center(i), grid.y_center(j));
        }
    }
    v
}

/// Cells of the boundary strip `{ d < c eps }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripMask {
    pub c: f64,
    pub eps: f64,
    nx: usize,
    /// Per row: center distance below `c eps`.
    row_indicator: Vec<bool>,
    /// Per row: fraction of the cell height inside the strip.
    row_weight: Vec<f64>,
}

impl StripMask {
    pub fn width(&self) -> f64 {
        self.c * self.eps
    }
    pub fn indicator(&self, c: usize) -> bool {
        self.row_indicator[c / self.nx]
    }
    pub fn weight(&self, c: usize) -> f64 {
        self.row_weight[c / self.nx]
    }
    pub fn row_weight(&self, j: usize) -> f64 {
        self.row_weight[j]
    }
    pub fn row_indicator(&self, j: usize) -> bool {
        self.row_indicator[j]
    }
    /// Weighted strip volume.
    pub fn volume(&self, grid: &ChannelGrid) -> f64 {
        (0..grid.ny())
            .map(|j| self.row_weight[j] * grid.row_volume(j))
            .sum::<f64>()
            * grid.nx() as f64
    }
}

/// Length of `[a, b]` with `d = min(y, 1 - y) < width`.
pub(crate) fn strip_overlap(a: f64, b: f64, width: f64) -> f64 {
    let lower = (b.min(width) - a).max(0.0);
    let upper = (b - a.max(1.0 - width)).max(0.0);
    (lower + upper).min(b - a)
}

pub fn strip_mask(grid: &ChannelGrid, c: f64, eps: f64) -> Result<StripMask> {
    if !(c > 0.0 && eps > 0.0) {
        return Err(invalid(
            "c*eps",
            format!("c = {c}, eps = {eps} must be > 0"),
        ));
    }
    let width = c * eps;
    if width >= 0.5 {
        return Err(Error::StripNotWellDefined { width });
    }
    let f = grid.y_faces();
    let row_weight = (0..grid.ny())
        .map(|j| strip_overlap(f[j], f[j + 1], width) / grid.heights()[j])
        .collect();
    let row_indicator = (0..grid.ny())
        .map(|j| grid.row_distance(j) < width)
        .collect();
    Ok(StripMask {
        c,
        eps,
        nx: grid.nx(),
        row_indicator,
        row_weight,
    })
}

/// Volume-weighted discrete `L^p` norm (`p = f64::INFINITY` for the max),
/// optionally restricted to a strip with fractional weights.
pub fn lp_norm(field: &[f64], grid: &ChannelGrid, p: f64, mask: Option<&StripMask>) -> f64 {
    assert!(p >= 1.0, "p = {p} must be >= 1");
    let weight = |c: usize| mask.map_or(1.0, |m| m.weight(c));
    if p.is_infinite() {
        return field
            .iter()
            .enumerate()
            .filter(|(c, _)| weight(*c) > 0.0)
            .fold(0.0_f64, |acc, (_, v)| acc.max(v.abs()));
    }
    let mut s = 0.0;
    for j in 0..grid.ny() {
        let row: f64 = (0..grid.nx())
            .map(|i| {
                let c = grid.idx(i, j);
                let a = field[c].abs();
                if p == 1.0 {
                    a
                } else if p == 2.0 {
                    a * a
                } else {
                    a.powf(p)
                }
            })
            .sum();
        s += row * grid.row_volume(j) * mask.map_or(1.0, |m| m.row_weight(j));
    }
    s.powf(1.0 / p)
}

/// Integral of a cell field (volume-weighted sum).
pub fn integrate(field: &[f64], grid: &ChannelGrid) -> f64 {
    (0..grid.ny())
        .map(|j| {
            let row: f64 = field[j * grid.nx()..(j + 1) * grid.nx()].iter().sum();
            row * grid.row_volume(j)
        })
        .sum()
}

/// Second-order gradient of a scalar: central and periodic in `x`, three-point
/// on the stretched `y` metric, one-sided three-point in the wall rows.
pub fn scalar_gradient(field: &[f64], grid: &ChannelGrid) -> Vec<[f64; 2]> {
    let nx = grid.nx();
    let inv2dx = 0.5 / grid.dx();
    let mut out = vec![[0.0; 2]; grid.cells()];
    for j in 0..grid.ny() {
        let st = grid.stencil(j);
        for i in 0..nx {
            let ip = if i + 1 == nx { 0 } else { i + 1 };
            let im = if i == 0 { nx - 1 } else { i - 1 };
            let c = grid.idx(i, j);
            let dfx = (field[grid.idx(ip, j)] - field[grid.idx(im, j)]) * inv2dx;
            let dfy = st.w[0] * field[grid.idx(i, st.rows[0])]
                + st.w[1] * field[grid.idx(i, st.rows[1])]
                + st.w[2] * field[grid.idx(i, st.rows[2])];
            out[c] = [dfx, dfy];
        }
    }
    out
}

/// Velocity gradient `G_ij = d u_i / d x_j` with the stencils of [`scalar_gradient`].
pub fn gradient(field: &VectorField, grid: &ChannelGrid) -> Vec<Tensor2> {
    let gx = scalar_gradient(&field.x, grid);
    let gy = scalar_gradient(&field.y, grid);
    gx.into_iter()
        .zip(gy)
        .map(|(a, b)| Tensor2::new2(a, b))
        .collect()
}

impl Tensor2 {
    /// Rows `[du/dx, du/dy]`, `[dv/dx, dv/dy]`.
    pub fn new2(row_u: [f64; 2], row_v: [f64; 2]) -> Self {
        crate::tensor::Tensor([row_u, row_v])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_faces() {
        let g = ChannelGrid::uniform(2.0, 4, 4).unwrap();
        assert_eq!(g.y_faces(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!((g.total_volume() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_wall_cell_is_smaller() {
        let g = ChannelGrid::build(1.0, 8, 64, 3.0).unwrap();
        assert!(g.heights()[0] < 1.0 / 64.0);
        assert!(g.heights()[32] > 1.0 / 64.0);
        assert!((g.total_volume() - 1.0).abs() < 1e-13);
        for j in 0..g.ny() {
            let d = g.row_distance(j);
            assert_eq!(d, g.y_center(j).min(1.0 - g.y_center(j)));
        }
        // symmetric
        for j in 0..32 {
            assert!((g.heights()[j] - g.heights()[63 - j]).abs() < 1e-14);
        }
    }

    #[test]
    fn stretch_solve_hits_target() {
        let s = solve_stretch(128, 5e-4).unwrap();
        let g = ChannelGrid::build(1.0, 4, 128, s).unwrap();
        assert!(g.heights()[0] <= 5e-4);
        assert!(g.heights()[0] > 4.9e-4);
        assert_eq!(solve_stretch(16, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn resolution_rule() {
        for w in [0.08, 0.01, 5e-3] {
            let g = resolve_strip(2.0, 8, 128, w, 8).unwrap();
            assert!(g.rows_within(w) >= 8);
            assert!(g.wall_height() <= w / 8.0);
            g.check_resolves(w, 8).unwrap();
        }
        assert!(matches!(
            resolve_strip(2.0, 8, 8, 1e-3, 8),
            Err(Error::UnresolvedStrip { .. })
        ));
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(ChannelGrid::build(1.0, 3, 8, 1.0).is_err());
        assert!(ChannelGrid::build(1.0, 8, 3, 1.0).is_err());
        assert!(ChannelGrid::build(1.0, 8, 8, 0.5).is_err());
        assert!(ChannelGrid::from_faces(1.0, 8, vec![0.0, 0.3, 0.2, 0.6, 1.0]).is_err());
    }

    #[test]
    fn strip_weights_on_uniform_grid() {
        let g = ChannelGrid::uniform(1.0, 4, 10).unwrap();
        let m = strip_mask(&g, 1.0, 0.25).unwrap();
        let w: Vec<f64> = (0..10).map(|j| m.row_weight(j)).collect();
        let expect = [1.0, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{w:?}");
        }
        assert!(m.row_indicator(1) && !m.row_indicator(2));
        assert!((m.volume(&g) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn strip_must_be_narrow() {
        let g = ChannelGrid::uniform(1.0, 4, 10).unwrap();
        assert!(matches!(
            strip_mask(&g, 2.0, 0.3),
            Err(Error::StripNotWellDefined { .. })
        ));
        let tiny = strip_mask(&g, 1.0, 1e-12).unwrap();
        assert!(tiny.volume(&g) < 1e-10);
    }

    #[test]
    fn lp_norm_basics() {
        let g = ChannelGrid::build(3.0, 6, 12, 2.0).unwrap();
        let k = vec![-2.0; g.cells()];
        assert!((lp_norm(&k, &g, 1.0, None) - 6.0).abs() < 1e-12);
        assert!((lp_norm(&k, &g, f64::INFINITY, None) - 2.0).abs() < 1e-15);
        let z = vec![0.0; g.cells()];
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp_norm(&z, &g, p, None), 0.0);
        }
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = ChannelGrid::build(1.0, 8, 16, 4.0).unwrap();
        let f = VectorField::from_fn(&g, |_, y| [y, 0.0]);
        for t in gradient(&f, &g) {
            assert!((t.0[0][1] - 1.0).abs() < 1e-10);
            assert!(t.0[0][0].abs() < 1e-12 && t.0[1][0].abs() < 1e-12 && t.0[1][1].abs() < 1e-12);
        }
        let c = VectorField::from_fn(&g, |_, _| [3.0, -1.0]);
        assert!(gradient(&c, &g).iter().all(|t| t.norm_sq() < 1e-20));
    }

    #[test]
    fn gradient_second_order_in_x() {
        let err = |n: usize| {
            let g = ChannelGrid::uniform(2.0, n, 8).unwrap();
            let k = std::f64::consts::PI;
            let f = VectorField::from_fn(&g, |x, _| [(k * x).sin(), 0.0]);
            gradient(&f, &g)
                .iter()
                .enumerate()
                .map(|(c, t)| (t.0[0][0] - k * (k * g.x_center(c % n)).cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(16), err(32), err(64));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!(o1 > 1.9 && o2 > 1.9, "{o1} {o2}");
    }
}
