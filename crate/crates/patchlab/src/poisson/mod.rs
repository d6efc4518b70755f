//! The constrained torsion problem
//!
//! ```text
//! Δp = −2 in D,   p = 0 on the outer boundary,   p = c_i on ∂h_i,
//! ∫_{∂h_i} ∇p·n dσ = −2|h_i|   (n pointing out of the hole h_i),
//! ```
//!
//! solved with first-order elements as `p = u + Σ c_j v_j` (`Δu = −2`,
//! `u|∂D = 0`; `v_j` harmonic, `1` on `∂h_j`, `0` on the other boundaries),
//! and the Talenti-type inequalities built on it.
//!
//! All boundary fluxes are computed in weak form: with `χ` the
//! piecewise-linear function equal to `1` on the nodes of one boundary
//! component and `0` at all other nodes,
//! `∫_{∂h} ∇w·n dσ = −(∫∇w·∇χ + ∫Δw χ)`, which never differentiates the
//! discrete solution on the boundary.

pub mod fem;
pub mod mesh;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    fraenkel_asymmetry, loop_perimeter, measures, Patch, Point, Raster, Shape, DEFAULT_BOUNDARY_NODES,
};
use fem::{cg, cg_refined, hat_integrals, stiffness};
pub use mesh::{ExactCurve, Mesh, MeshOptions, INTERIOR, OUTER};

/// Relative residual targeted by the iterative solver.
const CG_TOL: f64 = 1e-13;
/// Largest accepted relative residual.
const CG_ACCEPT: f64 = 1e-10;

/// Discretization controls for [`solve_constrained_with`].
#[derive(Debug, Clone, Copy)]
pub struct PoissonOptions {
    /// The target edge length is `|∂D| / boundary_nodes`.
    pub boundary_nodes: usize,
    /// Explicit target edge length (overrides `boundary_nodes`).
    pub edge_target: Option<f64>,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        Self { boundary_nodes: DEFAULT_BOUNDARY_NODES, edge_target: None }
    }
}

/// Solution of the constrained torsion problem on a mesh.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    /// The triangulation.
    pub mesh: Mesh,
    /// Nodal values of `p`.
    pub p: Vec<f64>,
    /// Hole constants `c_i`.
    pub hole_constants: Vec<f64>,
    /// `∫_{∂h_i} ∇p·n dσ` with `n` pointing out of the hole.
    pub hole_fluxes: Vec<f64>,
    /// Meshed hole areas `|h_i|`.
    pub hole_areas: Vec<f64>,
    /// Coupling matrix `A_ij = ∫_{∂h_i} ∇v_j·n dσ`.
    pub matrix: DMatrix<f64>,
    /// Right-hand side `b_i = −2|h_i| − ∫_{∂h_i} ∇u·n dσ`.
    pub rhs: DVector<f64>,
    /// `∫_{∂D_0} ∇p·ν dσ` with `ν` the outward normal of `D`.
    pub outer_flux: f64,
    /// `|D|` of the continuous domain (used by the Talenti bounds).
    pub area: f64,
    /// Area of the triangulated domain.
    pub mesh_area: f64,
    /// Largest solver iteration count.
    pub cg_iterations: usize,
    /// Whether the sign-pattern check forced one refinement.
    pub refined: bool,
}

/// Why the sign pattern of `A` failed, if it did.
pub fn sign_pattern_violation(a: &DMatrix<f64>) -> Option<String> {
    let n = a.nrows();
    for j in 0..n {
        if !(a[(j, j)] < 0.0) {
            return Some(format!("A[{j},{j}] = {} is not negative", a[(j, j)]));
        }
        let mut col = 0.0;
        for i in 0..n {
            col += a[(i, j)];
            if i != j && !(a[(i, j)] > 0.0) {
                return Some(format!("A[{i},{j}] = {} is not positive", a[(i, j)]));
            }
        }
        if !(col < 0.0) {
            return Some(format!("column {j} sums to {col}, not negative"));
        }
    }
    None
}

/// Solves on a given mesh; `area` is `|D|` of the continuous domain.
/// Fails with a solver error if the hole matrix has the wrong sign pattern.
pub fn solve_on_mesh(mesh: Mesh, area: f64) -> Result<PoissonSolution> {
    let n = mesh.points.len();
    let k = stiffness(&mesh);
    let hats = hat_integrals(&mesh);
    let mut map = vec![None; n];
    let mut free = Vec::new();
    for i in 0..n {
        if mesh.tags[i] == INTERIOR {
            map[i] = Some(free.len());
            free.push(i);
        }
    }
    let kff = k.restrict(&map, free.len());
    let mut iterations = 0;
    let mut solve_free = |rhs: Vec<f64>| -> Result<Vec<f64>> {
        let (x, info) = cg(&kff, &rhs, CG_TOL, CG_ACCEPT)?;
        iterations = iterations.max(info.iterations);
        Ok(x)
    };
    let by_tag = |tag: i32| mesh.nodes_with_tag(tag);
    let holes: Vec<Vec<usize>> = (1..=mesh.holes as i32).map(by_tag).collect();
    let outer = by_tag(OUTER);
    let apply = |w: &[f64]| {
        let mut y = vec![0.0; n];
        k.mul(w, &mut y);
        y
    };
    let sum_over = |v: &[f64], nodes: &[usize]| nodes.iter().map(|&i| v[i]).sum::<f64>();
    let chi_int: Vec<f64> = holes.iter().map(|h| sum_over(&hats, h)).collect();

    // u: Δu = −2, zero boundary values.
    let uf = solve_free(free.iter().map(|&i| 2.0 * hats[i]).collect())?;
    let mut u = vec![0.0; n];
    for (f, &i) in free.iter().enumerate() {
        u[i] = uf[f];
    }
    // v_j: harmonic, 1 on hole j.
    let mut vs = Vec::with_capacity(holes.len());
    for h in &holes {
        let mut w = vec![0.0; n];
        for &i in h {
            w[i] = 1.0;
        }
        let kw = apply(&w);
        let vf = solve_free(free.iter().map(|&i| -kw[i]).collect())?;
        for (f, &i) in free.iter().enumerate() {
            w[i] = vf[f];
        }
        vs.push(w);
    }
    let nh = holes.len();
    let ku = apply(&u);
    let kv: Vec<Vec<f64>> = vs.iter().map(|v| apply(v)).collect();
    let mut a = DMatrix::zeros(nh, nh);
    let mut b = DVector::zeros(nh);
    for i in 0..nh {
        for j in 0..nh {
            a[(i, j)] = -sum_over(&kv[j], &holes[i]);
        }
        let flux_u = -sum_over(&ku, &holes[i]) + 2.0 * chi_int[i];
        b[i] = -2.0 * mesh.hole_areas[i] - flux_u;
    }
    if let Some(why) = sign_pattern_violation(&a) {
        return Err(Error::Solver(format!("hole matrix sign pattern violated: {why}")));
    }
    let c = if nh > 0 {
        a.clone().lu().solve(&b).ok_or_else(|| Error::Solver("singular hole matrix".into()))?
    } else {
        DVector::zeros(0)
    };
    let mut p = u;
    for (j, v) in vs.iter().enumerate() {
        for i in 0..n {
            p[i] += c[j] * v[i];
        }
    }
    let kp = apply(&p);
    let hole_fluxes = (0..nh).map(|i| -sum_over(&kp, &holes[i]) + 2.0 * chi_int[i]).collect();
    let outer_flux = sum_over(&kp, &outer) - 2.0 * sum_over(&hats, &outer);
    let mesh_area = mesh.area();
    let hole_areas = mesh.hole_areas.clone();
    Ok(PoissonSolution {
        mesh,
        p,
        hole_constants: c.iter().copied().collect(),
        hole_fluxes,
        hole_areas,
        matrix: a,
        rhs: b,
        outer_flux,
        area,
        mesh_area,
        cg_iterations: iterations,
        refined: false,
    })
}

/// The constrained problem written for `φ = |x|²/2 + p`: `Δφ = 0`,
/// `φ = |x|²/2` on the outer boundary, `φ = |x|²/2 + c_i` on `∂h_i` and
/// zero flux through every hole.  Radial data make the discrete `φ`
/// exactly constant, which the formulation in `p` cannot reproduce with
/// linear elements.
#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    /// The triangulation.
    pub mesh: Mesh,
    /// Nodal values of `φ − shift`.
    pub phi: Vec<f64>,
    /// Constant removed from `φ` (the mean outer data) to keep its
    /// gradient free of cancellation error.
    pub shift: f64,
    /// Hole constants `c_i` of `p`.
    pub hole_constants: Vec<f64>,
    /// Meshed hole areas.
    pub hole_areas: Vec<f64>,
}

/// Solves the `φ` formulation on a mesh.
pub fn solve_harmonic_on_mesh(mesh: Mesh) -> Result<HarmonicSolution> {
    let n = mesh.points.len();
    let k = stiffness(&mesh);
    let mut map = vec![None; n];
    let mut free = Vec::new();
    for i in 0..n {
        if mesh.tags[i] == INTERIOR {
            map[i] = Some(free.len());
            free.push(i);
        }
    }
    let kff = k.restrict(&map, free.len());
    let apply = |w: &[f64]| {
        let mut y = vec![0.0; n];
        k.mul(w, &mut y);
        y
    };
    // Discrete harmonic extension of boundary data `w` (interior entries ignored).
    let extend = |mut w: Vec<f64>| -> Result<Vec<f64>> {
        for &i in &free {
            w[i] = 0.0;
        }
        let kw = apply(&w);
        let (x, _) = cg_refined(&kff, &free.iter().map(|&i| -kw[i]).collect::<Vec<_>>(), CG_TOL, CG_ACCEPT)?;
        for (f, &i) in free.iter().enumerate() {
            w[i] = x[f];
        }
        Ok(w)
    };
    // Shifting the data by a constant is exact for harmonic extension and
    // keeps the extension small when the outer data is nearly constant.
    let outer = mesh.nodes_with_tag(OUTER);
    let shift = outer.iter().map(|&i| 0.5 * (mesh.points[i][0].powi(2) + mesh.points[i][1].powi(2))).sum::<f64>() / outer.len().max(1) as f64;
    let q: Vec<f64> = mesh.points.iter().map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]) - shift).collect();
    let g = extend(q)?;
    let holes: Vec<Vec<usize>> = (1..=mesh.holes as i32).map(|t| mesh.nodes_with_tag(t)).collect();
    let mut vs = Vec::with_capacity(holes.len());
    for h in &holes {
        let mut w = vec![0.0; n];
        for &i in h {
            w[i] = 1.0;
        }
        vs.push(extend(w)?);
    }
    let nh = holes.len();
    let sum_over = |v: &[f64], nodes: &[usize]| nodes.iter().map(|&i| v[i]).sum::<f64>();
    let kg = apply(&g);
    let kv: Vec<Vec<f64>> = vs.iter().map(|v| apply(v)).collect();
    let mut a = DMatrix::zeros(nh, nh);
    let mut b = DVector::zeros(nh);
    for i in 0..nh {
        for j in 0..nh {
            a[(i, j)] = -sum_over(&kv[j], &holes[i]);
        }
        b[i] = sum_over(&kg, &holes[i]);
    }
    if let Some(why) = sign_pattern_violation(&a) {
        return Err(Error::Solver(format!("hole matrix sign pattern violated: {why}")));
    }
    let c = if nh > 0 {
        a.lu().solve(&b).ok_or_else(|| Error::Solver("singular hole matrix".into()))?
    } else {
        DVector::zeros(0)
    };
    let mut phi = g;
    for (j, v) in vs.iter().enumerate() {
        for i in 0..n {
            phi[i] += c[j] * v[i];
        }
    }
    let hole_areas = mesh.hole_areas.clone();
    Ok(HarmonicSolution { mesh, phi, shift, hole_constants: c.iter().map(|c| c + shift).collect(), hole_areas })
}

impl HarmonicSolution {
    /// `∇φ` on triangle `t`.
    pub fn grad_phi(&self, t: &[usize; 3]) -> [f64; 2] {
        self.mesh.gradient(t, &self.phi)
    }

    /// Nodal `p = φ − |x|²/2`.
    pub fn p_nodal(&self) -> Vec<f64> {
        self.mesh.points.iter().zip(&self.phi).map(|(x, f)| f + self.shift - 0.5 * (x[0] * x[0] + x[1] * x[1])).collect()
    }

    /// `sup p` over the nodes.
    pub fn sup_p(&self) -> f64 {
        self.p_nodal().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫p = ∫φ − ½∫|x|²`.
    pub fn integral_p(&self) -> f64 {
        let m = &self.mesh;
        let int_phi: f64 =
            m.triangles.iter().map(|t| m.area_of(t) * (self.phi[t[0]] + self.phi[t[1]] + self.phi[t[2]]) / 3.0).sum();
        int_phi + self.shift * m.area() - 0.5 * second_moment(m)
    }

    /// Weak-form outward normal derivative `∂_νφ` at every node of boundary
    /// component `tag` (exact flux share `a(φ, χ_n)` divided by the nodal
    /// boundary length, since `Δφ = 0`).
    pub fn normal_derivative(&self, tag: i32) -> Vec<(usize, f64)> {
        let m = &self.mesh;
        let n = m.points.len();
        let mut aphi = vec![0.0; n];
        for t in &m.triangles {
            let g = self.grad_phi(t);
            let ar = m.area_of(t);
            let hg = m.hat_gradients(t);
            for k in 0..3 {
                aphi[t[k]] += ar * (g[0] * hg[k][0] + g[1] * hg[k][1]);
            }
        }
        let blen = nodal_boundary_length(m);
        m.nodes_with_tag(tag).into_iter().map(|i| (i, aphi[i] / blen[i])).collect()
    }
}

/// Half the length of the boundary edges meeting at each node.
pub fn nodal_boundary_length(m: &Mesh) -> Vec<f64> {
    let mut blen = vec![0.0; m.points.len()];
    for (i, j, _) in m.boundary_edges() {
        let l = (m.points[i][0] - m.points[j][0]).hypot(m.points[i][1] - m.points[j][1]);
        blen[i] += 0.5 * l;
        blen[j] += 0.5 * l;
    }
    blen
}

/// `∫|x|²` over a mesh (exact for each triangle).
pub fn second_moment(m: &Mesh) -> f64 {
    m.triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| m.points[i]);
            let s = [a[0] + b[0] + c[0], a[1] + b[1] + c[1]];
            let q = |p: Point| p[0] * p[0] + p[1] * p[1];
            m.area_of(t) * (q(a) + q(b) + q(c) + s[0] * s[0] + s[1] * s[1]) / 12.0
        })
        .sum()
}

fn total_perimeter(shape: &Shape) -> f64 {
    match shape {
        Shape::Disk { radius, .. } => 2.0 * PI * radius,
        Shape::Annulus { r_inner, r_outer, .. } => 2.0 * PI * (r_inner + r_outer),
        _ => shape.loops(4 * DEFAULT_BOUNDARY_NODES).iter().map(|l| loop_perimeter(&l.pts)).sum(),
    }
}

/// Meshes a single connected shape with target edge length `h`
/// (analytic curves are sampled with nodes on the curve).
pub fn mesh_shape(shape: &Shape, h: f64) -> Result<Mesh> {
    match shape {
        Shape::Annulus { center, r_inner, r_outer } => {
            let n_theta = ((2.0 * PI * r_outer / h).ceil() as usize).max(32);
            let layers = (((r_outer - r_inner) / h).ceil() as usize).max(8);
            Mesh::two_circles(*center, *r_inner, *center, *r_outer, n_theta, layers)
        }
        Shape::Polygon { outer, holes } => Mesh::from_loops(outer, holes, MeshOptions::uniform(h)),
        Shape::Raster(_) => {
            let loops = shape.loops(0);
            let outer: Vec<_> = loops.iter().filter(|l| !l.is_hole).collect();
            if outer.len() != 1 {
                return Err(Error::Domain(format!("raster has {} outer boundaries; need a connected set", outer.len())));
            }
            let holes: Vec<Vec<Point>> = loops.iter().filter(|l| l.is_hole).map(|l| l.pts.clone()).collect();
            Mesh::from_loops(&outer[0].pts, &holes, MeshOptions::uniform(h))
        }
        Shape::Disk { .. } | Shape::Ellipse { .. } => {
            let per = total_perimeter(shape);
            let n = ((per / h).ceil() as usize).max(32);
            let l = shape.loops(n);
            let mut m = Mesh::from_loops(&l[0].pts, &[], MeshOptions::uniform(h))?;
            if let Some(Some(c)) = ExactCurve::of_shape(shape).first() {
                m.snap_boundary(OUTER, c)?;
            }
            Ok(m)
        }
    }
}

/// [`solve_constrained_with`] at default resolution.
pub fn solve_constrained(patch: &Patch) -> Result<PoissonSolution> {
    solve_constrained_with(patch, PoissonOptions::default())
}

/// Solves the constrained problem on a connected patch.  If the hole
/// matrix fails the sign-pattern check the mesh is refined once (edge
/// length halved) before giving up.
pub fn solve_constrained_with(patch: &Patch, opts: PoissonOptions) -> Result<PoissonSolution> {
    let patch = patch.normalized()?;
    if patch.components.len() != 1 {
        return Err(Error::Domain(format!(
            "constrained solve needs a connected patch, got {} components",
            patch.components.len()
        )));
    }
    let shape = &patch.components[0];
    let area = measures(&patch)?.area;
    let h = opts.edge_target.unwrap_or_else(|| total_perimeter(shape) / opts.boundary_nodes.max(16) as f64);
    match solve_on_mesh(mesh_shape(shape, h)?, area) {
        Err(Error::Solver(msg)) if msg.contains("sign pattern") => {
            let mut s = solve_on_mesh(mesh_shape(shape, 0.5 * h)?, area)?;
            s.refined = true;
            Ok(s)
        }
        other => other,
    }
}

impl PoissonSolution {
    /// `sup p` (attained at a node for piecewise-linear functions).
    pub fn sup_p(&self) -> f64 {
        self.p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min p`.
    pub fn inf_p(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫_D p`.
    pub fn integral_p(&self) -> f64 {
        self.mesh
            .triangles
            .iter()
            .map(|t| self.mesh.area_of(t) * (self.p[t[0]] + self.p[t[1]] + self.p[t[2]]) / 3.0)
            .sum()
    }

    /// `∫_D |∇p|²`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.mesh
            .triangles
            .iter()
            .map(|t| {
                let g = self.mesh.gradient(t, &self.p);
                self.mesh.area_of(t) * (g[0] * g[0] + g[1] * g[1])
            })
            .sum()
    }

    /// `∫_D |x|²` over the meshed domain (exact for each triangle).
    pub fn second_moment(&self) -> f64 {
        second_moment(&self.mesh)
    }

    /// `∫_D ∇p·x` (exact for piecewise-linear `p`).
    pub fn gradient_moment(&self) -> f64 {
        self.mesh
            .triangles
            .iter()
            .map(|t| {
                let g = self.mesh.gradient(t, &self.p);
                let c = self.mesh.centroid(t);
                self.mesh.area_of(t) * (g[0] * c[0] + g[1] * c[1])
            })
            .sum()
    }

    /// `|{p > k}|`, exact for the piecewise-linear `p`.
    pub fn superlevel_area(&self, k: f64) -> f64 {
        self.mesh
            .triangles
            .iter()
            .map(|t| {
                let mut v = t.map(|i| self.p[i]);
                v.sort_by(f64::total_cmp);
                let a = self.mesh.area_of(t);
                if k <= v[0] {
                    a
                } else if k >= v[2] {
                    0.0
                } else if k < v[1] {
                    a * (1.0 - (k - v[0]).powi(2) / ((v[1] - v[0]) * (v[2] - v[0])))
                } else {
                    a * (v[2] - k).powi(2) / ((v[2] - v[0]) * (v[2] - v[1]))
                }
            })
            .sum()
    }

    /// Weak-form normal derivative `∂_ν(|x|²/2 + p)` (outward normal of
    /// `D`) at every node of boundary component `tag`, as `(node, value)`.
    pub fn phi_normal_derivative(&self, tag: i32) -> Vec<(usize, f64)> {
        let m = &self.mesh;
        let n = m.points.len();
        // a(φ, χ_n) with the exact gradient x of |x|²/2.
        let mut aphi = vec![0.0; n];
        for t in &m.triangles {
            let gp = m.gradient(t, &self.p);
            let c = m.centroid(t);
            let ar = m.area_of(t);
            let hg = m.hat_gradients(t);
            for k in 0..3 {
                aphi[t[k]] += ar * ((gp[0] + c[0]) * hg[k][0] + (gp[1] + c[1]) * hg[k][1]);
            }
        }
        let blen = nodal_boundary_length(m);
        // Δφ = 0, so the flux through node n's boundary share is a(φ, χ_n).
        m.nodes_with_tag(tag).into_iter().map(|i| (i, aphi[i] / blen[i])).collect()
    }
}

/// Talenti-type bounds and their gaps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TalentiReport {
    /// `sup p`.
    pub sup_p: f64,
    /// `∫p`.
    pub int_p: f64,
    /// `|D|/2π`.
    pub bound_sup: f64,
    /// `|D|²/4π`.
    pub bound_int: f64,
    /// `bound_sup − sup_p`.
    pub gap_sup: f64,
    /// `bound_int − int_p`.
    pub gap_int: f64,
    /// Absolute tolerance on `sup p` (10 × disk benchmark, scaled).
    pub tol_sup: f64,
    /// Absolute tolerance on `∫p`.
    pub tol_int: f64,
    /// Both gaps `≥ −tol`.
    pub pass: bool,
    /// Mesh edge target.
    pub edge_target: f64,
}

/// Relative errors of `sup p` and `∫p` on the unit disk meshed with
/// `boundary_nodes` boundary nodes (cached per resolution).
pub fn disk_benchmark(boundary_nodes: usize) -> Result<(f64, f64)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, (f64, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().map_err(|_| Error::Solver("benchmark cache poisoned".into()))?.get(&boundary_nodes) {
        return Ok(*v);
    }
    let disk = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
    let s = solve_constrained_with(&disk, PoissonOptions { boundary_nodes, edge_target: None })?;
    let v = ((s.sup_p() - 0.5).abs() / 0.5, (s.integral_p() - PI / 4.0).abs() / (PI / 4.0));
    cache.lock().map_err(|_| Error::Solver("benchmark cache poisoned".into()))?.insert(boundary_nodes, v);
    Ok(v)
}

/// Solver tolerance factors `(sup, int)`: `10 ×` the relative disk
/// benchmark errors (`sup p` and `∫p`).
pub fn solver_tolerance(boundary_nodes: usize) -> Result<(f64, f64)> {
    let (es, ei) = disk_benchmark(boundary_nodes)?;
    Ok((10.0 * es.max(f64::EPSILON), 10.0 * ei.max(f64::EPSILON)))
}

/// `sup p ≤ |D|/2π` and `∫p ≤ |D|²/4π` with their gaps.
pub fn talenti_report(sol: &PoissonSolution, boundary_nodes: usize) -> Result<TalentiReport> {
    let (ts, ti) = solver_tolerance(boundary_nodes)?;
    let bound_sup = sol.area / (2.0 * PI);
    let bound_int = sol.area * sol.area / (4.0 * PI);
    let (sup_p, int_p) = (sol.sup_p(), sol.integral_p());
    let (tol_sup, tol_int) = (ts * bound_sup, ti * bound_int);
    Ok(TalentiReport {
        sup_p,
        int_p,
        bound_sup,
        bound_int,
        gap_sup: bound_sup - sup_p,
        gap_int: bound_int - int_p,
        tol_sup,
        tol_int,
        pass: bound_sup - sup_p >= -tol_sup && bound_int - int_p >= -tol_int,
        edge_target: sol.mesh.edge_target,
    })
}

/// The energy identity and inequality for `p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientEnergy {
    /// `∫|∇p|²`.
    pub dirichlet: f64,
    /// `∫|x|²`.
    pub second_moment: f64,
    /// `−∫∇p·x`.
    pub neg_moment: f64,
    /// `|−∫∇p·x − ∫|∇p|²|`.
    pub identity_error: f64,
    /// `∫|x|² − ∫|∇p|²` (non-negative, zero for centred disks/annuli).
    pub inequality_gap: f64,
}

/// `−∫∇p·x = ∫|∇p|² ≤ ∫|x|²`.
pub fn gradient_energy_check(sol: &PoissonSolution) -> GradientEnergy {
    let dirichlet = sol.dirichlet_energy();
    let second_moment = sol.second_moment();
    let neg_moment = -sol.gradient_moment();
    GradientEnergy {
        dirichlet,
        second_moment,
        neg_moment,
        identity_error: (neg_moment - dirichlet).abs(),
        inequality_gap: second_moment - dirichlet,
    }
}

/// Sampled distribution function `g(k) = |{p > k}|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionFunction {
    /// Levels.
    pub k: Vec<f64>,
    /// `g(k)`.
    pub g: Vec<f64>,
    /// `|D|`.
    pub area: f64,
}

impl DistributionFunction {
    /// True when `g` never increases.
    pub fn is_non_increasing(&self) -> bool {
        self.g.windows(2).all(|w| w[1] <= w[0])
    }

    /// `max_k [g(k) − (|D| − 2πk)₊]`; non-positive up to tolerance.
    pub fn bound_excess(&self) -> f64 {
        self.k
            .iter()
            .zip(&self.g)
            .map(|(k, g)| g - (self.area - 2.0 * PI * k).max(0.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `g(k)` on the given levels (default: 256 uniform levels on `[0, sup p]`).
pub fn distribution_function(sol: &PoissonSolution, k_grid: Option<&[f64]>) -> DistributionFunction {
    let k: Vec<f64> = match k_grid {
        Some(k) => k.to_vec(),
        None => {
            let s = sol.sup_p();
            (0..256).map(|i| s * i as f64 / 255.0).collect()
        }
    };
    let g = k.iter().map(|&k| sol.superlevel_area(k)).collect();
    DistributionFunction { k, g, area: sol.area }
}

/// Parameter of the Möbius map `h(z) = (z + b)/(1 + bz)` that sends the
/// eccentric annulus `B(aε, 1 + ε) ∖ B(0, 1)` to a concentric one: the
/// root in `(0, 1)` of `b² − ((2 + (1 − a²)ε)/a) b + 1`.
pub fn mobius_b(a: f64, eps: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) || !(eps > 0.0 && eps < a * a / 64.0) {
        return Err(Error::Domain(format!("need 0 < a < 1 and 0 < ε < a²/64, got a = {a}, ε = {eps}")));
    }
    let s = (2.0 + (1.0 - a * a) * eps) / a;
    // Smaller root without cancellation (the product of the roots is 1).
    Ok(2.0 / (s + (s * s - 4.0).sqrt()))
}

/// The Möbius map `h(z) = (z + b)/(1 + bz)` on the real line.
pub fn mobius_h(b: f64, x: f64) -> f64 {
    (x + b) / (1.0 + b * x)
}

/// Outcome of a quantitative hole-constant bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoleBound {
    /// The bound on `c₁`.
    pub bound: f64,
    /// Computed `c₁`.
    pub c1: f64,
    /// `|D|/2π` (the concentric value).
    pub concentric: f64,
    /// Tolerance used.
    pub tol: f64,
    /// `c₁ ≤ bound + tol`.
    pub pass: bool,
    /// Mesh resolution (smallest radial or angular spacing).
    pub edge_target: f64,
}

/// Constrained solve on `B(c_out, R) ∖ B(c_in, r)` with a structured mesh
/// (at least `layers_min` layers across the narrowest gap).
fn solve_two_circles(c_in: Point, r: f64, c_out: Point, big_r: f64, n_theta: usize, layers: usize) -> Result<PoissonSolution> {
    let mesh = Mesh::two_circles(c_in, r, c_out, big_r, n_theta, layers)?;
    solve_on_mesh(mesh, PI * (big_r * big_r - r * r))
}

/// `p|_{∂B₁} ≤ (|D|/2π)(1 − a²/16)` on `B(aε e₁, 1 + ε) ∖ B(0, 1)`,
/// `0 < ε < a²/64`.  The gap is resolved by a structured mesh with
/// 16 layers, whatever its width.
pub fn thin_annulus_bound(a: f64, eps: f64) -> Result<HoleBound> {
    mobius_b(a, eps)?;
    let sol = solve_two_circles([0.0, 0.0], 1.0, [a * eps, 0.0], 1.0 + eps, 2048, 16)?;
    let concentric = sol.area / (2.0 * PI);
    let bound = concentric * (1.0 - a * a / 16.0);
    let (ts, _) = solver_tolerance(DEFAULT_BOUNDARY_NODES)?;
    let tol = ts * concentric;
    let c1 = sol.hole_constants[0];
    Ok(HoleBound { bound, c1, concentric, tol, pass: c1 <= bound + tol, edge_target: sol.mesh.edge_target })
}

/// The explicit quadratic bound for `B(o₂, R) ∖ B(o₁, r)`, `l = |o₁ − o₂|`:
/// `c₁ ≤ β_max`, the positive root of
/// `πβ² + β|B_r| = |D|²/4π + |D||B_r|/2π − l²|B_r|/2`.
pub fn eccentric_annulus_bound(r: f64, big_r: f64, l: f64) -> Result<HoleBound> {
    if !(r > 0.0 && l > 0.0 && l + r < big_r) {
        return Err(Error::Domain(format!("need B(o₁, {r}) ⊂ B(o₂, {big_r}) with l = {l} > 0")));
    }
    let beta = beta_max(r, big_r, l);
    let h = 2.0 * PI * big_r / DEFAULT_BOUNDARY_NODES as f64;
    let layers = (((big_r - r + l) / h).ceil() as usize).max(16);
    let sol = solve_two_circles([l, 0.0], r, [0.0, 0.0], big_r, 2 * DEFAULT_BOUNDARY_NODES, layers)?;
    let concentric = sol.area / (2.0 * PI);
    let (ts, _) = solver_tolerance(DEFAULT_BOUNDARY_NODES)?;
    let tol = ts * concentric;
    let c1 = sol.hole_constants[0];
    Ok(HoleBound { bound: beta, c1, concentric, tol, pass: c1 <= beta + tol, edge_target: sol.mesh.edge_target })
}

/// Positive root of `πβ² + β|B_r| − (|D|²/4π + |D||B_r|/2π − l²|B_r|/2)`.
pub fn beta_max(r: f64, big_r: f64, l: f64) -> f64 {
    let br = PI * r * r;
    let d = PI * (big_r * big_r - r * r);
    let c = d * d / (4.0 * PI) + d * br / (2.0 * PI) - l * l * br / 2.0;
    (-br + (br * br + 4.0 * PI * c).sqrt()) / (2.0 * PI)
}

/// Hole constant of a doubly-connected patch against `|D|/2π`, with the
/// asymmetry of the filled set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymmetryHoleReport {
    /// `c₁ / (|D|/2π)`.
    pub ratio: f64,
    /// Fraenkel asymmetry of `D ∪ h̄`.
    pub asymmetry_filled: f64,
    /// Asymmetries at or below this value count as disks.
    pub asymmetry_floor: f64,
    /// `ratio < 1` whenever the asymmetry exceeds the floor.
    pub pass: bool,
    /// `max_k [g(k) − (|D| − 2πk)₊]` (the constant-free weakening).
    pub distribution_excess: f64,
}

/// Asymmetry floor below which a set counts as a disk.
pub const ASYMMETRY_FLOOR: f64 = 1e-3;

fn filled(shape: &Shape) -> Result<Shape> {
    Ok(match shape {
        Shape::Annulus { center, r_outer, .. } => Shape::Disk { center: *center, radius: *r_outer },
        Shape::Polygon { outer, .. } => Shape::Polygon { outer: outer.clone(), holes: vec![] },
        Shape::Raster(r) => {
            let loops = shape.loops(0);
            let outer = loops
                .iter()
                .find(|l| !l.is_hole)
                .ok_or_else(|| Error::DegenerateGeometry("raster without outer boundary".into()))?;
            let g = r.grid;
            let mut out = Raster::empty(g);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    if crate::geometry::point_in_loop(g.center(i, j), &outer.pts) {
                        out.set(i, j, true);
                    }
                }
            }
            Shape::Raster(out)
        }
        _ => return Err(Error::Domain("asymmetry hole bound needs a doubly-connected patch".into())),
    })
}

/// Hole-constant deficit of a doubly-connected patch.
pub fn asymmetry_hole_bound(patch: &Patch) -> Result<AsymmetryHoleReport> {
    let patch = patch.normalized()?;
    if patch.components.len() != 1 || patch.components[0].hole_count() != 1 {
        return Err(Error::Domain("asymmetry hole bound needs a connected patch with exactly one hole".into()));
    }
    let sol = solve_constrained(&patch)?;
    let ratio = sol.hole_constants[0] / (sol.area / (2.0 * PI));
    let asym = fraenkel_asymmetry(&Patch::single(filled(&patch.components[0])?))?;
    let df = distribution_function(&sol, None);
    let (ts, _) = solver_tolerance(DEFAULT_BOUNDARY_NODES)?;
    Ok(AsymmetryHoleReport {
        ratio,
        asymmetry_filled: asym,
        asymmetry_floor: ASYMMETRY_FLOOR,
        pass: if asym > ASYMMETRY_FLOOR { ratio < 1.0 } else { ratio < 1.0 + ts },
        distribution_excess: df.bound_excess(),
    })
}

/// `𝒜(U) ≥ 𝒜(E)/4` whenever `U ⊂ E` and `|U| ≥ |E|(1 − 𝒜(E)/4)`:
/// returns `(𝒜(E), 𝒜(U), |U|/|E|)`.
pub fn cky_check(e: &Patch, u: &Patch) -> Result<(f64, f64, f64)> {
    let ae = fraenkel_asymmetry(e)?;
    let au = fraenkel_asymmetry(u)?;
    Ok((ae, au, measures(u)?.area / measures(e)?.area))
}

/// The constant-free isoperimetric direction `P(E) ≥ 2√(π|E|)`:
/// returns `P(E) − 2√(π|E|)`.
pub fn isoperimetric_excess(e: &Patch) -> Result<f64> {
    let m = measures(e)?;
    Ok(m.perimeter - 2.0 * (PI * m.area).sqrt())
}

/// Talenti report rows as CSV.
pub fn talenti_to_csv(rows: &[(String, TalentiReport)]) -> String {
    let mut s = String::from("shape,edge_target,sup_p,bound_sup,gap_sup,int_p,bound_int,gap_int,tol_sup,tol_int,pass\n");
    for (name, r) in rows {
        s.push_str(&format!(
            "{name},{:.6e},{:.12e},{:.12e},{:.6e},{:.12e},{:.12e},{:.6e},{:.3e},{:.3e},{}\n",
            r.edge_target, r.sup_p, r.bound_sup, r.gap_sup, r.int_p, r.bound_int, r.gap_int, r.tol_sup, r.tol_int, r.pass
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_torsion_matches_closed_form() {
        let disk = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
        let s = solve_constrained(&disk).unwrap();
        assert!((s.sup_p() - 0.5).abs() < 1e-3, "{}", s.sup_p());
        assert!((s.integral_p() - PI / 4.0).abs() < 1e-3, "{}", s.integral_p());
        let e = gradient_energy_check(&s);
        assert!(e.identity_error < 1e-8 * e.dirichlet, "{e:?}");
        assert!((s.outer_flux + 2.0 * s.mesh_area).abs() < 1e-9);
    }

    #[test]
    fn centred_annulus_constant_and_flux() {
        let ann = Patch::single(Shape::Annulus { center: [0.0, 0.0], r_inner: 1.0, r_outer: 2.0 });
        let s = solve_constrained(&ann).unwrap();
        assert!((s.hole_constants[0] - 1.5).abs() < 2e-3, "{:?}", s.hole_constants);
        assert!((s.hole_fluxes[0] + 2.0 * s.hole_areas[0]).abs() < 1e-8);
        // Conservation with the hole-outward normal convention.
        assert!((s.outer_flux - s.hole_fluxes[0] + 2.0 * s.mesh_area).abs() < 1e-8);
    }

    #[test]
    fn mobius_root_and_symmetry() {
        let (a, eps) = (0.5, 1e-3);
        let b = mobius_b(a, eps).unwrap();
        let s = (2.0 + (1.0 - a * a) * eps) / a;
        assert!((b * b - s * b + 1.0).abs() < 1e-12);
        assert!(a / 2.0 < b && b < a);
        let lhs = mobius_h(b, 1.0 + eps + a * eps) + mobius_h(b, -1.0 - eps + a * eps);
        assert!(lhs.abs() < 1e-12, "{lhs}");
        assert!(mobius_b(0.5, 0.01).is_err());
    }

    #[test]
    fn beta_max_limits() {
        assert!((beta_max(1.0, 2.0, 0.0) - 1.5).abs() < 1e-14);
        assert!(beta_max(1.0, 2.0, 0.5) < 1.5);
    }
}
