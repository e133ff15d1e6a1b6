// Cell-centered uniform grid with mirror ghost cells.
//
// Cell centers sit at x_i = (i + 1/2) hx, so no node lies on the boundary and
// the mirror ghost (ghost value = adjacent interior value) realizes the
// homogeneous Neumann condition to second order. Applying the five-point
// Laplacian twice, re-mirroring in between, realizes the no-flux condition on
// the chemical potential as well. All integrals are midpoint sums, so the
// discrete inner product <f,g> = hx*hy*sum(f*g) makes the Laplacian exactly
// self-adjoint, mass-neutral, and negative semidefinite.

use crate::error::{Error, Result};

/// Geometry of a cell-centered grid on [0,lx] x [0,ly].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

impl GridSpec {
    /// Cell counts must be at least 4 per axis so the repeated-Laplacian
    /// (biharmonic) stencil has interior support; lengths must be positive.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<GridSpec> {
        if nx < 4 || ny < 4 {
            return Err(Error::Usage(format!(
                "grid must have at least 4 cells per axis, got {nx}x{ny}"
            )));
        }
        if lx <= 0.0 || ly <= 0.0 || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::Usage(format!(
                "domain lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(GridSpec {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    /// x-coordinate of cell center i.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }
    /// y-coordinate of cell center j.
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }
}

/// Scalar field sampled at cell centers, row-major with x fastest.
#[derive(Debug, Clone)]
pub struct Field {
    grid: GridSpec,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Field {
        Field {
            grid,
            data: vec![0.0; grid.cells()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Field {
        Field {
            grid,
            data: vec![c; grid.cells()],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        let mut data = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                data.push(f(grid.x(i), y));
            }
        }
        Field { grid, data }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.grid.nx && j < self.grid.ny);
        j * self.grid.nx + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, c: f64) {
        self.data.fill(c);
    }

    pub fn copy_from(&mut self, src: &Field) {
        assert_eq!(self.grid, src.grid, "field op: grid mismatch");
        self.data.copy_from_slice(&src.data);
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Field) {
        assert_eq!(self.grid, other.grid, "field op: grid mismatch");
        for (v, o) in self.data.iter_mut().zip(&other.data) {
            *v += o;
        }
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &Field) {
        assert_eq!(self.grid, other.grid, "field op: grid mismatch");
        for (v, o) in self.data.iter_mut().zip(&other.data) {
            *v += s * o;
        }
    }

    /// self = a*f + b*g
    pub fn linear2(&mut self, a: f64, f: &Field, b: f64, g: &Field) {
        assert_eq!(self.grid, f.grid, "field op: grid mismatch");
        assert_eq!(self.grid, g.grid, "field op: grid mismatch");
        for ((v, x), y) in self.data.iter_mut().zip(&f.data).zip(&g.data) {
            *v = a * x + b * y;
        }
    }

    /// self *= w, pointwise
    pub fn mul_field(&mut self, w: &Field) {
        assert_eq!(self.grid, w.grid, "field op: grid mismatch");
        for (v, m) in self.data.iter_mut().zip(&w.data) {
            *v *= m;
        }
    }

    pub fn add_scalar(&mut self, c: f64) {
        for v in &mut self.data {
            *v += c;
        }
    }

    /// Discrete L2 inner product: hx*hy * sum(f g). Summation order is fixed
    /// (row-major) so results are bit-reproducible across runs.
    pub fn inner(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "inner: grid mismatch");
        let mut acc = 0.0;
        for (a, b) in self.data.iter().zip(&other.data) {
            acc += a * b;
        }
        acc * self.grid.hx * self.grid.hy
    }

    /// Midpoint-rule integral over the domain.
    pub fn integrate(&self) -> f64 {
        let mut acc = 0.0;
        for a in &self.data {
            acc += a;
        }
        acc * self.grid.hx * self.grid.hy
    }

    /// Discrete L2 norm.
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Five-point Laplacian with mirror ghosts (ghost = adjacent interior,
    /// i.e. clamped neighbor indices).
    pub fn laplacian_into(&self, out: &mut Field) {
        assert_eq!(self.grid, out.grid, "laplacian: grid mismatch");
        let nx = self.grid.nx;
        let ny = self.grid.ny;
        let cx = 1.0 / (self.grid.hx * self.grid.hx);
        let cy = 1.0 / (self.grid.hy * self.grid.hy);
        let f = &self.data;
        let o = &mut out.data;
        for j in 0..ny {
            let r = j * nx;
            let b = if j == 0 { r } else { r - nx };
            let a = if j == ny - 1 { r } else { r + nx };
            // mirror ghost makes the x-difference at i=0 collapse to f[1]-f[0]
            o[r] = (f[r + 1] - f[r]) * cx + (f[b] - 2.0 * f[r] + f[a]) * cy;
            for i in 1..nx - 1 {
                o[r + i] = (f[r + i - 1] - 2.0 * f[r + i] + f[r + i + 1]) * cx
                    + (f[b + i] - 2.0 * f[r + i] + f[a + i]) * cy;
            }
            let i = nx - 1;
            o[r + i] =
                (f[r + i - 1] - f[r + i]) * cx + (f[b + i] - 2.0 * f[r + i] + f[a + i]) * cy;
        }
    }

    /// Biharmonic as the Laplacian applied twice, mirroring the intermediate
    /// field again (no-flux condition on the chemical potential).
    pub fn biharmonic_into(&self, out: &mut Field, scratch: &mut Field) {
        self.laplacian_into(scratch);
        scratch.laplacian_into(out);
    }

    pub fn laplacian(&self) -> Field {
        let mut out = Field::zeros(self.grid);
        self.laplacian_into(&mut out);
        out
    }

    pub fn biharmonic(&self) -> Field {
        let mut out = Field::zeros(self.grid);
        let mut scratch = Field::zeros(self.grid);
        self.biharmonic_into(&mut out, &mut scratch);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::zeros(grid);
        for v in f.as_mut_slice() {
            *v = rng.random_range(-1.0..1.0);
        }
        f
    }

    /// Dense stencil matrix assembled by independent accumulation rules:
    /// each neighbor contributes +1/h^2 at its clamped index, the center
    /// -2/h^2 per axis. Clamping folds ghost contributions onto the border
    /// cells, which is exactly the mirror condition.
    fn dense_laplacian(grid: GridSpec) -> Vec<Vec<f64>> {
        let (nx, ny) = (grid.nx(), grid.ny());
        let n = nx * ny;
        let cx = 1.0 / (grid.hx() * grid.hx());
        let cy = 1.0 / (grid.hy() * grid.hy());
        let mut m = vec![vec![0.0; n]; n];
        let id = |i: usize, j: usize| j * nx + i;
        for j in 0..ny {
            for i in 0..nx {
                let k = id(i, j);
                m[k][k] += -2.0 * cx - 2.0 * cy;
                let west = if i == 0 { i } else { i - 1 };
                let east = if i == nx - 1 { i } else { i + 1 };
                let south = if j == 0 { j } else { j - 1 };
                let north = if j == ny - 1 { j } else { j + 1 };
                m[k][id(west, j)] += cx;
                m[k][id(east, j)] += cx;
                m[k][id(i, south)] += cy;
                m[k][id(i, north)] += cy;
            }
        }
        m
    }

    #[test]
    fn spec_rejects_small_and_degenerate_grids() {
        assert!(GridSpec::new(3, 8, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, 3, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 0.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 1.0, -2.0).is_err());
        assert!(GridSpec::new(4, 4, 1.0, 1.0).is_ok());
    }

    #[test]
    fn cell_centers_are_offset_half_spacing() {
        let g = GridSpec::new(8, 4, 2.0, 1.0).unwrap();
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.hy(), 0.25);
        assert_eq!(g.x(0), 0.125);
        assert_eq!(g.x(7), 2.0 - 0.125);
        assert_eq!(g.y(3), 1.0 - 0.125);
    }

    #[test]
    fn layout_is_row_major_x_fastest() {
        let g = GridSpec::new(5, 4, 1.0, 1.0).unwrap();
        let f = Field::from_fn(g, |x, y| x + 10.0 * y);
        assert_eq!(f.idx(1, 0), 1);
        assert_eq!(f.idx(0, 1), 5);
        assert_eq!(f.as_slice()[1], f.at(1, 0));
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = GridSpec::new(8, 6, 2.0, 3.0).unwrap();
        let f = Field::constant(g, 3.7);
        let lap = f.laplacian();
        assert!(lap.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn laplacian_matches_dense_stencil_matrix() {
        // every column, on a square and an anisotropic grid
        for (nx, ny, lx, ly) in [(4, 4, 1.0, 1.0), (5, 4, 2.0, 1.0)] {
            let g = GridSpec::new(nx, ny, lx, ly).unwrap();
            let m = dense_laplacian(g);
            let n = g.cells();
            for k in 0..n {
                let mut e = Field::zeros(g);
                e.as_mut_slice()[k] = 1.0;
                let lap = e.laplacian();
                for r in 0..n {
                    let want = m[r][k];
                    let got = lap.as_slice()[r];
                    assert!(
                        (want - got).abs() <= 1e-12 * (1.0 + want.abs()),
                        "entry ({r},{k}): dense {want}, stencil {got}"
                    );
                }
            }
        }
    }

    #[test]
    fn laplacian_converges_at_second_order_on_neumann_eigenfunction() {
        let pi = std::f64::consts::PI;
        let err = |n: usize| {
            let g = GridSpec::new(n, n, 1.0, 1.0).unwrap();
            let f = Field::from_fn(g, |x, y| (pi * x).cos() * (pi * y).cos());
            let mut lap = f.laplacian();
            // exact: -2 pi^2 f
            lap.axpy(2.0 * pi * pi, &f);
            lap.max_abs()
        };
        let e256 = err(256);
        let e512 = err(512);
        // truncation bound: |err| <= h^2/12 * (f_xxxx + f_yyyy) = h^2 pi^4 / 6
        let h = 1.0 / 256.0;
        assert!(e256 <= h * h * pi.powi(4) / 6.0 * 1.01, "e256 = {e256:.3e}");
        let ratio = e256 / e512;
        assert!((3.9..=4.1).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn biharmonic_converges_at_second_order() {
        let pi = std::f64::consts::PI;
        let err = |n: usize| {
            let g = GridSpec::new(n, n, 1.0, 1.0).unwrap();
            let f = Field::from_fn(g, |x, y| (pi * x).cos() * (pi * y).cos());
            let mut bi = f.biharmonic();
            bi.axpy(-4.0 * pi.powi(4), &f);
            (bi.max_abs(), f)
        };
        let (e128, _) = err(128);
        let (e256, _) = err(256);
        let h = 1.0 / 128.0;
        assert!(e128 <= 660.0 * h * h, "e128 = {e128:.3e}");
        let ratio = e128 / e256;
        assert!((3.8..=4.2).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn laplacian_is_self_adjoint_in_discrete_inner_product() {
        for (seed, (nx, ny, lx, ly)) in [(1u64, (16, 16, 1.0, 1.0)), (2, (12, 20, 2.5, 0.75))] {
            let g = GridSpec::new(nx, ny, lx, ly).unwrap();
            let f = random_field(g, seed);
            let grand = random_field(g, 100 + seed);
            let lhs = f.laplacian().inner(&grand);
            let rhs = f.inner(&grand.laplacian());
            let scale = f.norm() * grand.norm() / (g.hx() * g.hx()).min(g.hy() * g.hy());
            assert!(
                (lhs - rhs).abs() <= 1e-13 * scale,
                "asymmetry {:.3e} vs scale {:.3e}",
                (lhs - rhs).abs(),
                scale
            );
        }
    }

    #[test]
    fn laplacian_is_mass_neutral() {
        for seed in 0..4u64 {
            let g = GridSpec::new(24, 16, 3.0, 2.0).unwrap();
            let f = random_field(g, seed);
            let m = f.laplacian().integrate();
            assert!(m.abs() <= 1e-11, "mass of laplacian = {m:.3e}");
        }
    }

    #[test]
    fn laplacian_is_negative_semidefinite() {
        for seed in 0..4u64 {
            let g = GridSpec::new(16, 16, 1.0, 2.0).unwrap();
            let f = random_field(g, seed);
            let q = f.inner(&f.laplacian());
            assert!(q <= 1e-12, "quadratic form = {q:.3e}");
        }
    }

    #[test]
    fn midpoint_sum_annihilates_full_period_cosine() {
        let pi = std::f64::consts::PI;
        let g = GridSpec::new(32, 32, 1.0, 1.0).unwrap();
        let f = Field::from_fn(g, |x, _| (pi * x).cos());
        let one = Field::constant(g, 1.0);
        assert!(f.inner(&one).abs() <= 1e-12);
    }

    #[test]
    fn integrate_constant_gives_area_times_value() {
        let g = GridSpec::new(10, 14, 2.0, 3.5).unwrap();
        let f = Field::constant(g, -1.25);
        assert!((f.integrate() - (-1.25 * 7.0)).abs() <= 1e-12);
    }

    #[test]
    #[should_panic(expected = "grid mismatch")]
    fn dimension_mismatch_panics() {
        let a = Field::zeros(GridSpec::new(4, 4, 1.0, 1.0).unwrap());
        let b = Field::zeros(GridSpec::new(5, 4, 1.0, 1.0).unwrap());
        let _ = a.inner(&b);
    }
}
