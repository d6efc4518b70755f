//! Potentials `1_D * K` and `ω * K`, the relative stream function
//! `f_Ω = ω * K − (Ω/2)|x|²`, velocities, stationarity residuals, level
//! sets of smooth vorticities and their step-function approximations.

mod convolve;
mod field;

pub use convolve::Convolver;
pub(crate) use convolve::square_value;
pub use field::ScalarField;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::marching_squares;
use crate::error::{Error, Result};
use crate::geometry::{measures, point_in_loop, Grid, Patch, Point, Shape, DEFAULT_BOUNDARY_NODES};
use crate::quad::adaptive_gk;
use crate::special::{disk_riesz_radial_any, KernelSpec};

/// Vorticity carried by a [`RotatingState`].
#[derive(Debug, Clone)]
pub enum Density {
    /// `ω = Σ w_i 1_{D_i}` over the components of a patch.
    Patch {
        /// Disjoint components.
        patch: Patch,
        /// Positive weight per component.
        weights: Vec<f64>,
    },
    /// Sampled non-negative vorticity with compact support in the grid.
    Field(ScalarField),
}

/// A candidate uniformly rotating (or stationary, `Ω = 0`) solution.
#[derive(Debug, Clone)]
pub struct RotatingState {
    /// The vorticity.
    pub density: Density,
    /// Angular velocity `Ω`.
    pub omega: f64,
    /// Interaction kernel.
    pub kernel: KernelSpec,
    /// Boundary panels per analytic curve (polygon loops are refined to
    /// about this many panels).
    pub boundary_nodes: usize,
}

impl RotatingState {
    /// Indicator of a patch with unit weights.
    pub fn patch(patch: Patch, omega: f64, kernel: KernelSpec) -> Result<Self> {
        let n = patch.components.len();
        Self::weighted(patch, vec![1.0; n], omega, kernel)
    }

    /// Weighted patch `Σ w_i 1_{D_i}`; every weight must be positive.
    pub fn weighted(patch: Patch, weights: Vec<f64>, omega: f64, kernel: KernelSpec) -> Result<Self> {
        let patch = patch.normalized()?;
        if weights.len() != patch.components.len() {
            return Err(Error::Domain(format!("{} weights for {} components", weights.len(), patch.components.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::Domain(format!("component weights must be positive, got {w}")));
        }
        Ok(Self { density: Density::Patch { patch, weights }, omega, kernel, boundary_nodes: DEFAULT_BOUNDARY_NODES })
    }

    /// Smooth vorticity `ω ≥ 0` vanishing on the outermost ring of cells.
    pub fn smooth(field: ScalarField, omega: f64, kernel: KernelSpec) -> Result<Self> {
        field.validate(true)?;
        if field.min() < 0.0 {
            return Err(Error::Domain("vorticity must be non-negative".into()));
        }
        Ok(Self { density: Density::Field(field), omega, kernel, boundary_nodes: DEFAULT_BOUNDARY_NODES })
    }

    /// Overrides the boundary resolution.
    pub fn with_boundary_nodes(mut self, n: usize) -> Self {
        self.boundary_nodes = n.max(16);
        self
    }

    /// Evaluator of `ω * K`.
    pub fn convolver(&self) -> Result<Convolver> {
        match &self.density {
            Density::Patch { patch, weights } => Convolver::for_patch(patch, weights, self.kernel, self.boundary_nodes),
            Density::Field(f) => Ok(Convolver::for_field(f, self.kernel)),
        }
    }

    /// `f_Ω(x)` from a prepared evaluator.
    pub fn f_with(&self, conv: &Convolver, x: Point) -> f64 {
        conv.value(x) - 0.5 * self.omega * (x[0] * x[0] + x[1] * x[1])
    }
}

/// `(1_D * K)(x)` at the default boundary resolution.
pub fn convolve_indicator(patch: &Patch, k: &KernelSpec, x: Point) -> Result<f64> {
    Ok(Convolver::for_indicator(patch, *k, DEFAULT_BOUNDARY_NODES)?.value(x))
}

/// `f_Ω(x) = (ω * K)(x) − (Ω/2)|x|²`.
pub fn f_omega(state: &RotatingState, x: Point) -> Result<f64> {
    Ok(state.f_with(&state.convolver()?, x))
}

/// Oscillation of `f_Ω` along one boundary component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentResidual {
    /// Index of the boundary curve (in patch order, outer before holes).
    pub component_id: usize,
    /// True for hole boundaries.
    pub is_hole: bool,
    /// Mean of `f_Ω` over the nodes (the constant `C_i`).
    pub mean: f64,
    /// `max − min` of `f_Ω` over the nodes.
    pub oscillation: f64,
    /// Number of evaluation nodes.
    pub nodes: usize,
}

fn node_loops(state: &RotatingState) -> Result<Vec<(Vec<Point>, bool)>> {
    let Density::Patch { patch, .. } = &state.density else {
        return Err(Error::Domain("stationarity residual needs a patch state; use smooth_residual".into()));
    };
    let mut loops = Vec::new();
    for s in &patch.components {
        match s {
            Shape::Raster(_) => loops.extend(s.loops(state.boundary_nodes).into_iter().map(|l| (l.pts, l.is_hole))),
            _ => loops.extend(s.boundary(state.boundary_nodes).into_iter().map(|c| (c.distinct_nodes().to_vec(), c.is_hole))),
        }
    }
    Ok(loops)
}

/// Per-boundary-component oscillation of `f_Ω` over the boundary nodes.
pub fn stationarity_residual(state: &RotatingState) -> Result<Vec<ComponentResidual>> {
    let conv = state.convolver()?;
    node_loops(state)?
        .into_iter()
        .enumerate()
        .map(|(id, (pts, is_hole))| {
            let vals: Vec<f64> = pts.par_iter().map(|&p| state.f_with(&conv, p)).collect();
            Ok(summarize(id, is_hole, &vals))
        })
        .collect()
}

fn summarize(id: usize, is_hole: bool, vals: &[f64]) -> ComponentResidual {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    ComponentResidual {
        component_id: id,
        is_hole,
        mean: vals.iter().sum::<f64>() / vals.len().max(1) as f64,
        oscillation: max - min,
        nodes: vals.len(),
    }
}

/// Largest oscillation over all components.
pub fn max_oscillation(res: &[ComponentResidual]) -> f64 {
    res.iter().map(|r| r.oscillation).fold(0.0, f64::max)
}

/// Velocity at a point together with an accuracy flag.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VelocityEval {
    /// `u = ∇^⊥(ω * K)`.
    pub u: [f64; 2],
    /// Set when `α ≥ 1` and the point lies within one panel length of the
    /// boundary, where the gradient kernel is not integrable on the curve
    /// and the quadrature loses accuracy.
    pub low_accuracy: bool,
}

/// Velocity `u = ∇^⊥(ω * K)(x)`.
pub fn velocity(state: &RotatingState, x: Point) -> Result<VelocityEval> {
    let conv = state.convolver()?;
    Ok(velocity_with(state, &conv, x))
}

fn velocity_with(state: &RotatingState, conv: &Convolver, x: Point) -> VelocityEval {
    let low_accuracy = state.kernel.alpha >= 1.0 && conv.distance_to_support_boundary(x) < conv.min_panel_length();
    VelocityEval { u: conv.velocity(x), low_accuracy }
}

/// `max |(u − Ω x^⊥)·n| / max |u|` over the boundary nodes of analytic
/// curves and over edge midpoints of polygons: the relative-frame normal
/// velocity, which vanishes for rotating solutions.
pub fn boundary_normal_velocity(state: &RotatingState) -> Result<f64> {
    let conv = state.convolver()?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for c in conv.curves() {
        for i in 0..c.panel_count() {
            let s = if matches!(c.curve, crate::geometry::Curve::Polyline(_)) { 0.5 } else { 0.0 };
            let (p, d) = c.eval(i, s);
            let len = d[0].hypot(d[1]);
            let n = [d[1] / len, -d[0] / len];
            let u = conv.velocity(p);
            let rel = [u[0] + state.omega * p[1], u[1] - state.omega * p[0]];
            worst = worst.max((rel[0] * n[0] + rel[1] * n[1]).abs());
            scale = scale.max(u[0].hypot(u[1]));
        }
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}

/// Marching-squares contours `{ω = level}` of a sampled field (cell centres
/// as sample points, padded with zeros).  A level that coincides with a
/// sample value is shifted by `10⁻¹²·range`; levels at or above the maximum
/// give an empty list.
pub fn level_set_components(omega: &ScalarField, level: f64) -> Result<Vec<Vec<Point>>> {
    let (lo, hi) = (omega.min().min(0.0), omega.max());
    if level >= hi {
        return Ok(Vec::new());
    }
    let range = (hi - lo).max(f64::MIN_POSITIVE);
    let mut level = level;
    while omega.values.iter().any(|&v| v == level) {
        level += 1e-12 * range;
    }
    let g = omega.grid;
    let (nx, ny) = (g.nx + 2, g.ny + 2);
    let mut v = vec![0.0; nx * ny];
    for j in 0..g.ny {
        for i in 0..g.nx {
            v[(j + 1) * nx + i + 1] = omega.get(i, j);
        }
    }
    let origin = [g.origin[0] - 0.5 * g.h, g.origin[1] - 0.5 * g.h];
    Ok(marching_squares(&v, nx, ny, origin, g.h, level))
}

/// Oscillation of `f_Ω` along one level-set component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelResidual {
    /// The level value.
    pub level: f64,
    /// Index of the contour within the level.
    pub component_id: usize,
    /// Mean of `f_Ω` along the contour.
    pub mean: f64,
    /// `max − min` of `f_Ω` along the contour.
    pub oscillation: f64,
}

/// Per-level, per-component oscillations of `f_Ω` for a smooth state,
/// with warnings for levels that produced no contour.
pub fn smooth_residual(state: &RotatingState, levels: &[f64]) -> Result<(Vec<LevelResidual>, Vec<String>)> {
    let Density::Field(field) = &state.density else {
        return Err(Error::Domain("smooth residual needs a sampled vorticity".into()));
    };
    let conv = state.convolver()?;
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for &level in levels {
        let loops = level_set_components(field, level)?;
        if loops.is_empty() {
            warnings.push(format!("level {level}: no contour, skipped"));
            continue;
        }
        for (id, pts) in loops.iter().enumerate() {
            // At most 128 evaluation points per contour.
            let stride = pts.len().div_ceil(128).max(1);
            let sample: Vec<Point> = pts.iter().step_by(stride).copied().collect();
            let vals: Vec<f64> = sample.par_iter().map(|&p| state.f_with(&conv, p)).collect();
            let r = summarize(id, false, &vals);
            out.push(LevelResidual { level, component_id: id, mean: r.mean, oscillation: r.oscillation });
        }
    }
    Ok((out, warnings))
}

/// CSV rows `component_id,level,mean_C,oscillation` (level empty for patch
/// boundaries).
pub fn residuals_to_csv(patch_res: &[ComponentResidual], level_res: &[LevelResidual]) -> String {
    let mut s = String::from("component_id,level,mean_C,oscillation\n");
    for r in patch_res {
        s.push_str(&format!("{},,{:.17e},{:.17e}\n", r.component_id, r.mean, r.oscillation));
    }
    for r in level_res {
        s.push_str(&format!("{},{:.17e},{:.17e},{:.17e}\n", r.component_id, r.level, r.mean, r.oscillation));
    }
    s
}

/// A step-function approximation `ω_n = Σ w_i 1_{D_i}` of a smooth density.
#[derive(Debug, Clone)]
pub struct StepApproximation {
    /// Disjoint components `D_i`.
    pub patch: Patch,
    /// Value of `ω_n` on each component.
    pub weights: Vec<f64>,
    /// The cut levels `r_1 < … < r_n`.
    pub levels: Vec<f64>,
    /// `max |ω_n − ω|` over the cell centres.
    pub sup_error: f64,
    /// The guaranteed bound `2‖ω‖_∞/n`.
    pub bound: f64,
}

fn is_regular_level(field: &ScalarField, loops: &[Vec<Point>]) -> bool {
    let g = field.grid;
    let range = field.max() - field.min().min(0.0);
    let threshold = 1e-3 * range / g.h;
    loops.iter().flatten().all(|p| {
        let i = (((p[0] - g.origin[0]) / g.h).floor().max(0.0) as usize).min(g.nx - 1);
        let j = (((p[1] - g.origin[1]) / g.h).floor().max(0.0) as usize).min(g.ny - 1);
        let (gx, gy) = field.gradient_at(i, j);
        gx.hypot(gy) >= threshold
    })
}

fn signed_area(pts: &[Point]) -> f64 {
    crate::geometry::polygon_area(pts)
}

/// Groups loops (region on the left) into polygons: counter-clockwise
/// loops are outer boundaries, each clockwise loop becomes a hole of the
/// smallest outer loop containing it.
fn group_loops(loops: Vec<Vec<Point>>) -> Vec<Shape> {
    let (outers, holes): (Vec<_>, Vec<_>) = loops.into_iter().partition(|l| signed_area(l) > 0.0);
    let mut shapes: Vec<(Vec<Point>, Vec<Vec<Point>>)> = outers.into_iter().map(|o| (o, Vec::new())).collect();
    for h in holes {
        let best = shapes
            .iter()
            .enumerate()
            .filter(|(_, (o, _))| point_in_loop(h[0], o))
            .min_by(|a, b| signed_area(&a.1 .0).total_cmp(&signed_area(&b.1 .0)))
            .map(|(k, _)| k);
        if let Some(k) = best {
            shapes[k].1.push(h);
        }
    }
    shapes.into_iter().map(|(outer, holes)| Shape::Polygon { outer, holes }).collect()
}

/// Step approximation with `n` regular cut levels.
///
/// The nominal levels are `(l − ½)‖ω‖_∞/n`; a level whose contour crosses a
/// cell with `|∇ω| < 10⁻³·range/h` is shifted by multiples of
/// `‖ω‖_∞/(20n)` (at most ten tries).  `ω_n` equals `r_l` on
/// `{r_l < ω ≤ r_{l+1}}`, so every gap, and hence `‖ω_n − ω‖_∞`, stays
/// below `2‖ω‖_∞/n`.
pub fn step_approximation(omega: &ScalarField, n: usize) -> Result<StepApproximation> {
    if n < 2 {
        return Err(Error::Domain(format!("step approximation needs n ≥ 2, got {n}")));
    }
    omega.validate(false)?;
    let m = omega.max();
    if !(m > 0.0) {
        return Err(Error::Domain("vorticity has no positive values".into()));
    }
    let mut levels = Vec::with_capacity(n);
    let mut level_loops = Vec::with_capacity(n);
    for l in 1..=n {
        let base = (l as f64 - 0.5) * m / n as f64;
        let mut found = None;
        for k in 0..=10usize {
            let shift = if k % 2 == 1 { 1.0 } else { -1.0 } * k.div_ceil(2) as f64 * m / (20.0 * n as f64);
            let r = base + shift;
            let loops = level_set_components(omega, r)?;
            if !loops.is_empty() && is_regular_level(omega, &loops) {
                found = Some((r, loops));
                break;
            }
        }
        let (r, loops) = found.ok_or_else(|| Error::Contour(format!("no regular level near {base}")))?;
        levels.push(r);
        level_loops.push(loops);
    }
    let mut components = Vec::new();
    let mut weights = Vec::new();
    for l in 0..n {
        let mut loops = level_loops[l].clone();
        if l + 1 < n {
            loops.extend(level_loops[l + 1].iter().map(|lp| lp.iter().rev().copied().collect::<Vec<_>>()));
        }
        for s in group_loops(loops) {
            components.push(s);
            weights.push(levels[l]);
        }
    }
    let patch = Patch { components };
    let g = omega.grid;
    let boxes: Vec<_> = patch.components.iter().map(|s| s.bbox()).collect();
    let sup_error = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let p = g.center(k % g.nx, k / g.nx);
            let v = patch
                .components
                .iter()
                .zip(&boxes)
                .zip(&weights)
                .find(|((s, b), _)| p[0] >= b.0 && p[0] <= b.2 && p[1] >= b.1 && p[1] <= b.3 && s.contains(p))
                .map_or(0.0, |(_, w)| *w);
            (v - omega.values[k]).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(StepApproximation { patch, weights, levels, sup_error, bound: 2.0 * m / n as f64 })
}

/// Total mass `Σ w_i |D_i|` of a step approximation.
pub fn step_mass(s: &StepApproximation) -> Result<f64> {
    s.patch
        .components
        .iter()
        .zip(&s.weights)
        .map(|(c, w)| Ok(w * measures(&Patch::single(c.clone()))?.area))
        .sum()
}

/// Newtonian potential of a radial density `ω(|x|)` supported in
/// `|x| ≤ support`: `ln r ∫_0^r ω s ds + ∫_r^∞ ω(s) s ln s ds`.
pub fn radial_newtonian_potential(profile: impl Fn(f64) -> f64, support: f64, r: f64) -> f64 {
    let tol = 1e-14;
    let rr = r.min(support);
    let inner = adaptive_gk(|s| profile(s) * s, 0.0, rr, tol, 40);
    let outer = if r < support { adaptive_gk(|s| profile(s) * s * s.ln(), r, support, tol, 40) } else { 0.0 };
    if r > 0.0 {
        r.ln() * inner + outer
    } else {
        outer
    }
}

/// The compactly supported bump `exp(1/(s² − 1))` for `s < 1`.
pub fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 / (s * s - 1.0)).exp()
    } else {
        0.0
    }
}

/// Largest error of the contour quadrature on the unit disk against the
/// closed forms (`(|x|² − 1)/4`, `½ ln|x|` for the Newtonian kernel and the
/// hypergeometric representation for Riesz kernels), sampled at boundary
/// nodes and at interior and exterior points, at `n_nodes` panels.
pub fn disk_benchmark_error(kernel: &KernelSpec, n_nodes: usize) -> Result<f64> {
    let disk = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
    let conv = Convolver::for_indicator(&disk, *kernel, n_nodes)?;
    let exact = |s: f64| -> Result<f64> {
        if kernel.is_newtonian() {
            Ok(if s <= 1.0 { (s * s - 1.0) / 4.0 } else { 0.5 * s.ln() })
        } else {
            Ok(-kernel.c_alpha * disk_riesz_radial_any(1.0, kernel.alpha, s)?)
        }
    };
    let mut pts: Vec<Point> = (0..16)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            [t.cos(), t.sin()]
        })
        .collect();
    pts.extend([[0.0, 0.0], [0.3, 0.1], [0.0, -0.7], [0.95, 0.0], [1.5, 0.2], [0.0, 3.0]]);
    let mut err: f64 = 0.0;
    for p in pts {
        err = err.max((conv.value(p) - exact(p[0].hypot(p[1]))?).abs());
    }
    Ok(err.max(f64::EPSILON))
}

/// Floor of [`residual_tolerance`]: accumulated roundoff of `O(1)`
/// potentials summed over a few thousand panels.
pub const RESIDUAL_ROUNDOFF_FLOOR: f64 = 1e-12;

/// Residual tolerance for patch states: `5 ×` the disk benchmark error, but
/// at least [`RESIDUAL_ROUNDOFF_FLOOR`] (analytic curves reach roundoff).
pub fn residual_tolerance(kernel: &KernelSpec, n_nodes: usize) -> Result<f64> {
    Ok((5.0 * disk_benchmark_error(kernel, n_nodes)?).max(RESIDUAL_ROUNDOFF_FLOOR))
}

/// Largest error of the cell quadrature on `grid` for the Newtonian
/// potential of a radial bump centred in the grid (radius 0.4 × the
/// smaller extent), against the radial oracle.
pub fn field_benchmark_error(grid: Grid) -> f64 {
    let c = grid.center(0, 0);
    let c = [c[0] + 0.5 * (grid.nx - 1) as f64 * grid.h, c[1] + 0.5 * (grid.ny - 1) as f64 * grid.h];
    let rho = 0.4 * grid.nx.min(grid.ny) as f64 * grid.h;
    let f = ScalarField::from_fn(grid, |p| bump((p[0] - c[0]).hypot(p[1] - c[1]) / rho));
    let conv = Convolver::for_field(&f, KernelSpec::newtonian());
    let mut err: f64 = 0.0;
    for s in [0.0, 0.3, 0.6, 0.9, 1.3] {
        let p = [c[0] + s * rho * 0.6, c[1] + s * rho * 0.8];
        // Scaling y = ρz: ρ² (ln ρ ∫bump s ds + V(|x|/ρ)).
        let exact = rho * rho * (rho.ln() * radial_mass(bump) + radial_newtonian_potential(bump, 1.0, s));
        err = err.max((conv.value(p) - exact).abs());
    }
    err.max(f64::EPSILON)
}

/// `∫_0^∞ ω(s) s ds` for a profile supported in `[0, 1]`.
fn radial_mass(profile: impl Fn(f64) -> f64) -> f64 {
    adaptive_gk(|s| profile(s) * s, 0.0, 1.0, 1e-15, 40)
}

/// Residual tolerance for smooth states: `5 ×` the field benchmark error.
pub fn field_tolerance(grid: Grid) -> f64 {
    5.0 * field_benchmark_error(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn radial_oracle_at_origin_and_far_field() {
        // Uniform disk profile: value (r² − 1)/4 inside, ½ ln r outside.
        let one = |s: f64| if s <= 1.0 { 1.0 } else { 0.0 };
        assert!((radial_newtonian_potential(one, 1.0, 0.5) - (0.25 - 1.0) / 4.0).abs() < 1e-12);
        assert!((radial_newtonian_potential(one, 1.0, 3.0) - 0.5 * 3f64.ln()).abs() < 1e-12);
        let _ = PI;
    }

    #[test]
    fn kirchhoff_ellipse_is_stationary_in_its_frame() {
        let e = Patch::single(Shape::Ellipse { center: [0.0, 0.0], a: 2.0, b: 1.0, angle: 0.0 });
        let good = RotatingState::patch(e.clone(), 2.0 / 9.0, KernelSpec::newtonian()).unwrap();
        let bad = RotatingState::patch(e, 0.3, KernelSpec::newtonian()).unwrap();
        let rg = max_oscillation(&stationarity_residual(&good).unwrap());
        let rb = max_oscillation(&stationarity_residual(&bad).unwrap());
        assert!(rg < 1e-9, "{rg}");
        // (0.3 − 2/9)/2 · (a² − b²)
        assert!((rb - (0.3 - 2.0 / 9.0) / 2.0 * 3.0).abs() < 1e-8, "{rb}");
        assert!(boundary_normal_velocity(&good).unwrap() < 1e-8);
    }
}
