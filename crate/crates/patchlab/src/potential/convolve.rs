//! Evaluation of `ω * K` and `∇(ω * K)` for patches and sampled densities.
//!
//! Patch components with explicit boundaries (polygons, disks, annuli,
//! ellipses) are handled by boundary integrals: with
//! `k(r) = r^{−2} ∫_0^r s K(s) ds` one has `div_y[(y − x) k(|y − x|)] = K(|y − x|)`,
//! so
//!
//! ```text
//! (1_D * K)(x) = ∫_{∂D} (y − x)·ν k(|y − x|) dσ(y),
//! ∇(1_D * K)(x) = −∫_{∂D} K(|y − x|) ν dσ(y).
//! ```
//!
//! The first integrand is bounded by `r|k(r)|` and the second is the
//! kernel itself, both integrable on the curve, so the identities hold for
//! every `x`, including points of `∂D`.  Rasters and sampled densities are
//! sums over cells: far cells use the midpoint rule, and cells within three
//! cells of the target are integrated exactly through the same boundary
//! formula applied to the cell square.

use crate::error::{Error, Result};
use crate::geometry::{integrate_segment_near, BoundaryComponent, Grid, Patch, Point, Shape};
use crate::special::KernelSpec;

use super::field::ScalarField;

/// Half-width (in cells) of the block of cells integrated exactly.
const NEAR_CELLS: i64 = 3;

#[derive(Debug, Clone)]
struct CellSet {
    grid: Grid,
    /// `(i, j, weight)` of every non-zero cell.
    cells: Vec<(usize, usize, f64)>,
}

/// Precomputed boundary curves and cells of a density, ready for repeated
/// evaluation of its potential and gradient.
#[derive(Debug, Clone)]
pub struct Convolver {
    kernel: KernelSpec,
    curves: Vec<(BoundaryComponent, f64)>,
    cells: Vec<CellSet>,
}

impl Convolver {
    /// Density `Σ w_i 1_{D_i}` of a patch; analytic boundaries are split
    /// into `n_nodes` panels, polygon edges are refined to about `n_nodes`
    /// panels per loop.
    pub fn for_patch(patch: &Patch, weights: &[f64], kernel: KernelSpec, n_nodes: usize) -> Result<Self> {
        if weights.len() != patch.components.len() {
            return Err(Error::Domain(format!(
                "{} weights for {} components",
                weights.len(),
                patch.components.len()
            )));
        }
        let mut curves = Vec::new();
        let mut cells = Vec::new();
        for (s, &w) in patch.components.iter().zip(weights) {
            match s {
                Shape::Raster(r) => {
                    let mut list = Vec::new();
                    for j in 0..r.grid.ny {
                        for i in 0..r.grid.nx {
                            if r.get(i, j) {
                                list.push((i, j, w));
                            }
                        }
                    }
                    cells.push(CellSet { grid: r.grid, cells: list });
                }
                _ => curves.extend(s.boundary(n_nodes).into_iter().map(|c| (c, w))),
            }
        }
        Ok(Self { kernel, curves, cells })
    }

    /// Indicator `1_D` of a patch (unit weights).
    pub fn for_indicator(patch: &Patch, kernel: KernelSpec, n_nodes: usize) -> Result<Self> {
        Self::for_patch(patch, &vec![1.0; patch.components.len()], kernel, n_nodes)
    }

    /// Piecewise-constant density given by cell samples.
    pub fn for_field(field: &ScalarField, kernel: KernelSpec) -> Self {
        let g = field.grid;
        let mut list = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let v = field.get(i, j);
                if v != 0.0 {
                    list.push((i, j, v));
                }
            }
        }
        Self { kernel, curves: Vec::new(), cells: vec![CellSet { grid: g, cells: list }] }
    }

    /// The kernel in use.
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Boundary curves with their weights.
    pub fn curves(&self) -> impl Iterator<Item = &BoundaryComponent> {
        self.curves.iter().map(|(c, _)| c)
    }

    /// `(ω * K)(x)`.
    pub fn value(&self, x: Point) -> f64 {
        let k = self.kernel;
        let mut total = 0.0;
        for (c, w) in &self.curves {
            total += w * c.integrate_near(x, |y, d| [flux_integrand(&k, x, y, d)])[0];
        }
        for set in &self.cells {
            total += cell_sum(set, x, |c, near| {
                if near {
                    [square_value(&k, x, c, set.grid.h)]
                } else {
                    let r = (x[0] - c[0]).hypot(x[1] - c[1]);
                    [k.eval(r) * set.grid.h * set.grid.h]
                }
            })[0];
        }
        total
    }

    /// `∇(ω * K)(x)`.
    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let k = self.kernel;
        let mut g = [0.0, 0.0];
        for (c, w) in &self.curves {
            let v = c.integrate_near(x, |y, d| gradient_integrand(&k, x, y, d));
            g[0] += w * v[0];
            g[1] += w * v[1];
        }
        for set in &self.cells {
            let v = cell_sum(set, x, |c, near| {
                if near {
                    square_gradient(&k, x, c, set.grid.h)
                } else {
                    let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
                    let r = dx.hypot(dy);
                    let s = k.eval_derivative(r) / r * set.grid.h * set.grid.h;
                    [s * dx, s * dy]
                }
            });
            g[0] += v[0];
            g[1] += v[1];
        }
        g
    }

    /// Velocity `∇^⊥(ω * K) = (−∂₂ψ, ∂₁ψ)`.
    pub fn velocity(&self, x: Point) -> [f64; 2] {
        let g = self.gradient(x);
        [-g[1], g[0]]
    }

    /// Smallest panel length of the boundary curves (`∞` without curves).
    pub fn min_panel_length(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (c, _) in &self.curves {
            for i in 0..c.panel_count() {
                m = m.min(c.panel_length(i));
            }
        }
        for set in &self.cells {
            m = m.min(set.grid.h);
        }
        m
    }

    /// Distance from `x` to the nearest boundary node or non-zero cell
    /// centre (used to flag near-singular gradient evaluations).
    pub fn distance_to_support_boundary(&self, x: Point) -> f64 {
        let mut d = f64::INFINITY;
        for (c, _) in &self.curves {
            for p in c.distinct_nodes() {
                d = d.min((p[0] - x[0]).hypot(p[1] - x[1]));
            }
        }
        for set in &self.cells {
            for &(i, j, _) in &set.cells {
                let p = set.grid.center(i, j);
                d = d.min((p[0] - x[0]).hypot(p[1] - x[1]));
            }
        }
        d
    }
}

#[inline]
fn flux_integrand(k: &KernelSpec, x: Point, y: Point, d: Point) -> f64 {
    let (rx, ry) = (y[0] - x[0], y[1] - x[1]);
    let r = rx.hypot(ry);
    if r == 0.0 {
        return 0.0;
    }
    // (y − x)·ν dσ with ν dσ = (dy₁, −dy₀).
    (rx * d[1] - ry * d[0]) * k.flux_profile(r)
}

#[inline]
fn gradient_integrand(k: &KernelSpec, x: Point, y: Point, d: Point) -> [f64; 2] {
    let r = (y[0] - x[0]).hypot(y[1] - x[1]);
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let kv = k.eval(r);
    [-kv * d[1], kv * d[0]]
}

fn square_corners(c: Point, h: f64) -> [Point; 4] {
    let s = 0.5 * h;
    [[c[0] - s, c[1] - s], [c[0] + s, c[1] - s], [c[0] + s, c[1] + s], [c[0] - s, c[1] + s]]
}

/// `∫_{cell} K(|x − y|) dy` over the square of side `h` centred at `c`.
pub(crate) fn square_value(k: &KernelSpec, x: Point, c: Point, h: f64) -> f64 {
    let q = square_corners(c, h);
    let mut acc = [0.0];
    for e in 0..4 {
        integrate_segment_near(x, q[e], q[(e + 1) % 4], &mut |y, d| [flux_integrand(k, x, y, d)], &mut acc);
    }
    acc[0]
}

/// `∇_x ∫_{cell} K(|x − y|) dy`.
fn square_gradient(k: &KernelSpec, x: Point, c: Point, h: f64) -> [f64; 2] {
    let q = square_corners(c, h);
    let mut acc = [0.0, 0.0];
    for e in 0..4 {
        integrate_segment_near(x, q[e], q[(e + 1) % 4], &mut |y, d| gradient_integrand(k, x, y, d), &mut acc);
    }
    acc
}

fn cell_sum<const N: usize>(set: &CellSet, x: Point, mut f: impl FnMut(Point, bool) -> [f64; N]) -> [f64; N] {
    let g = &set.grid;
    let ix = ((x[0] - g.origin[0]) / g.h).floor() as i64;
    let jy = ((x[1] - g.origin[1]) / g.h).floor() as i64;
    let mut acc = [0.0; N];
    for &(i, j, w) in &set.cells {
        let near = (i as i64 - ix).abs() <= NEAR_CELLS && (j as i64 - jy).abs() <= NEAR_CELLS;
        let v = f(g.center(i, j), near);
        for k in 0..N {
            acc[k] += w * v[k];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disk() -> Patch {
        Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 })
    }

    #[test]
    fn newtonian_disk_potential_is_exact() {
        let c = Convolver::for_indicator(&disk(), KernelSpec::newtonian(), 64).unwrap();
        for (x, exact) in [
            ([0.0, 0.0], -0.25),
            ([0.3, 0.4], (0.25 - 1.0) / 4.0),
            ([1.0, 0.0], 0.0),
            ([0.0, 2.0], 0.5 * 2f64.ln()),
        ] {
            assert!((c.value(x) - exact).abs() < 1e-12, "{x:?}: {}", c.value(x));
        }
        // Velocity of the disk: |u| = r/2 inside, 1/(2r) outside.
        let u = c.velocity([0.5, 0.0]);
        assert!((u[1] - 0.25).abs() < 1e-12 && u[0].abs() < 1e-12);
        let u = c.velocity([2.0, 0.0]);
        assert!((u[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn riesz_disk_matches_closed_form() {
        let k = KernelSpec::new(0.5).unwrap();
        let c = Convolver::for_indicator(&disk(), k, 128).unwrap();
        let exact = -k.c_alpha * 2.0 * PI / 1.5;
        assert!((c.value([0.0, 0.0]) - exact).abs() < 1e-11);
        let on = -k.c_alpha * 3.296_132_759_646_883_4;
        assert!((c.value([0.0, 1.0]) - on).abs() < 1e-9, "{}", c.value([0.0, 1.0]));
    }

    #[test]
    fn raster_cells_approach_the_disk() {
        let k = KernelSpec::newtonian();
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let g = Grid::covering((-1.1, -1.1, 1.1, 1.1), n);
            let r = Patch::single(Shape::Raster(disk().rasterize(g)));
            let c = Convolver::for_indicator(&r, k, 64).unwrap();
            errs.push((c.value([0.1, 0.05]) - (0.0125 - 1.0) / 4.0).abs());
        }
        assert!(errs[2] < errs[0] && errs[2] < 5e-3, "{errs:?}");
    }

    #[test]
    fn single_cell_matches_polygon_integral() {
        let k = KernelSpec::new(1.5).unwrap();
        let g = Grid { origin: [0.0, 0.0], h: 0.1, nx: 1, ny: 1 };
        let f = ScalarField { grid: g, values: vec![1.0] };
        let a = Convolver::for_field(&f, k);
        let p = Convolver::for_indicator(&Patch::single(Shape::rectangle(0.0, 0.0, 0.1, 0.1)), k, 16).unwrap();
        for x in [[0.05, 0.05], [0.1, 0.0], [0.3, 0.2]] {
            assert!((a.value(x) - p.value(x)).abs() < 1e-12 * p.value(x).abs().max(1.0), "{x:?} {} {}", a.value(x), p.value(x));
        }
    }
}
