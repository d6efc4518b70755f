//! The first-variation functional
//!
//! ```text
//! 𝓘 = Σ_i α_i ∫_{D_i} ∇φ_i·∇f_Ω dx,   φ_i = |x|²/2 + p_i,   f_Ω = ω * K − (Ω/2)|x|²,
//! ```
//!
//! evaluated twice: by volume quadrature over the finite-element mesh
//! (with `∇(ω * K)` computed by boundary quadrature of the kernel at each
//! quadrature point), and for the Newtonian kernel through the closed
//! combination obtained by integrating by parts,
//!
//! ```text
//! 𝓘 = (Σα_i|D_i|)²/4π − Ω Σα_i∫|x|² + Σα_i(2Ω − α_i)∫p_i + 2Ω Σα_i Σ_k c_ik|h_ik|
//!     + Σ_{i≠j} α_iα_j Σ_k c_ik ∫_{∂h_ik} ∇(1_{D_j} * 𝒩)·ν dσ.
//! ```
//!
//! For a rotating solution `f_Ω` is constant on every boundary component
//! while `∇φ_i` has zero flux through each of them, so `𝓘 = 0`; the
//! closed form has a definite sign on non-radial sets, which is the
//! rigidity mechanism.  The exterior variant works on `B_R ∖ D̄`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{measures, symmetric_difference, Loop, Patch, Point, Shape};
use crate::poisson::{
    solve_constrained_with, solve_harmonic_on_mesh, solver_tolerance, ExactCurve, HarmonicSolution, Mesh,
    PoissonOptions, PoissonSolution, OUTER,
};
use crate::potential::{max_oscillation, stationarity_residual, Convolver, Density, RotatingState};
use crate::quad::gauss4;
use crate::special::KernelSpec;

/// Relative tolerance of the variation tests, in units of `(Σα_i|D_i|)²/4π`.
pub const VARIATION_REL_TOL: f64 = 1e-3;

/// Degree-two rule on a triangle: the three edge midpoints, weight `|T|/3`.
fn midpoints(m: &Mesh, t: &[usize; 3]) -> [Point; 3] {
    let [a, b, c] = t.map(|i| m.points[i]);
    let mid = |p: Point, q: Point| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
    [mid(a, b), mid(b, c), mid(c, a)]
}

/// `f` at the midpoints of every triangle's edges (in [`midpoints`]
/// order), evaluated once per mesh edge.
fn midpoint_values(m: &Mesh, f: impl Fn(Point) -> [f64; 2] + Sync) -> Vec<[[f64; 2]; 3]> {
    let mut index = std::collections::HashMap::new();
    let mut edges = Vec::new();
    let ids: Vec<[usize; 3]> = m
        .triangles
        .iter()
        .map(|t| {
            std::array::from_fn(|k| {
                let (i, j) = (t[k], t[(k + 1) % 3]);
                *index.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    edges.push((i, j));
                    edges.len() - 1
                })
            })
        })
        .collect();
    let vals: Vec<[f64; 2]> = edges
        .par_iter()
        .map(|&(i, j)| {
            let (p, q) = (m.points[i], m.points[j]);
            f([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])])
        })
        .collect();
    ids.into_iter().map(|e| e.map(|k| vals[k])).collect()
}

/// `∫(x + ∇p)·∇ψ` over a mesh, `∇p` constant per triangle.
fn pairing(m: &Mesh, grad_p: impl Fn(&[usize; 3]) -> [f64; 2], grad_psi: impl Fn(Point) -> [f64; 2] + Sync) -> f64 {
    let gpsi = midpoint_values(m, grad_psi);
    m.triangles
        .iter()
        .zip(&gpsi)
        .map(|(t, gv)| {
            let g = grad_p(t);
            let w = m.area_of(t) / 3.0;
            midpoints(m, t)
                .into_iter()
                .zip(gv)
                .map(|(q, gp)| w * ((g[0] + q[0]) * gp[0] + (g[1] + q[1]) * gp[1]))
                .sum::<f64>()
        })
        .sum()
}

/// Named terms of the closed form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationTerms {
    /// `(Σα_i|D_i|)²/4π`.
    pub area_term: f64,
    /// `Ω Σα_i ∫|x|²` (enters with a minus sign).
    pub moment_term: f64,
    /// `Σα_i(2Ω − α_i)∫p_i` (`(2Ω − 1)∫p` for one unit patch).
    pub p_term: f64,
    /// `2Ω Σα_i Σ_k c_ik|h_ik|`.
    pub hole_term: f64,
    /// `Σ_{i≠j} α_iα_j Σ_k c_ik ∫_{∂h_ik} ∇(1_{D_j} * 𝒩)·ν dσ`.
    pub cross_terms: f64,
}

/// Both evaluations of `𝓘` and the split `𝓘 = 𝓘₁ + (−Ω)𝓘₂`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationReport {
    /// Angular velocity.
    pub omega: f64,
    /// Kernel exponent.
    pub alpha: f64,
    /// Volume quadrature of `Σα_i∫∇φ_i·∇f_Ω`.
    pub i_boundary: f64,
    /// Closed combination (Newtonian kernel only).
    pub i_identity: Option<f64>,
    /// Terms of the closed combination.
    pub terms: Option<VariationTerms>,
    /// `Ω`-independent part `𝓘₁`.
    pub i1: Option<f64>,
    /// `𝓘₂ = Σα_i ∫(|x|² + ∇p_i·x) ≥ 0`.
    pub i2: f64,
    /// `(Σα_i|D_i|)²/4π`, the scale of the tolerances.
    pub scale: f64,
    /// `VARIATION_REL_TOL · scale`.
    pub tol: f64,
    /// Mesh edge target of the Poisson solves.
    pub edge_target: f64,
    /// Boundary nodes of the potential evaluation.
    pub boundary_nodes: usize,
}

impl VariationReport {
    /// `|I_boundary − I_identity|` when both are available.
    pub fn two_path_gap(&self) -> Option<f64> {
        self.i_identity.map(|i| (i - self.i_boundary).abs())
    }

    /// The identity value when available, else the quadrature.
    pub fn best(&self) -> f64 {
        self.i_identity.unwrap_or(self.i_boundary)
    }

    /// Structured text: a term table followed by the totals.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("Omega".into(), fmt(self.omega)),
            ("alpha".into(), fmt(self.alpha)),
            ("edge_target".into(), fmt(self.edge_target)),
            ("boundary_nodes".into(), self.boundary_nodes.to_string()),
        ];
        if let Some(t) = &self.terms {
            rows.push(("|D|^2/4pi".into(), fmt(t.area_term)));
            rows.push(("Omega*int|x|^2".into(), fmt(t.moment_term)));
            rows.push(("(2Omega-alpha)*int p".into(), fmt(t.p_term)));
            rows.push(("2Omega*sum c|h|".into(), fmt(t.hole_term)));
            rows.push(("cross terms".into(), fmt(t.cross_terms)));
        }
        rows.push(("I_boundary".into(), fmt(self.i_boundary)));
        rows.push(("I_identity".into(), self.i_identity.map_or("n/a".into(), fmt)));
        rows.push(("I_1".into(), self.i1.map_or("n/a".into(), fmt)));
        rows.push(("I_2".into(), fmt(self.i2)));
        rows.push(("tol".into(), fmt(self.tol)));
        term_table("first variation", &rows)
    }

    /// CSV header matching [`VariationReport::csv_row`].
    pub const CSV_HEADER: &'static str =
        "omega,alpha,edge_target,boundary_nodes,i_boundary,i_identity,i1,i2,tol\n";

    /// One CSV row.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), fmt);
        format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt(self.omega),
            fmt(self.alpha),
            fmt(self.edge_target),
            self.boundary_nodes,
            fmt(self.i_boundary),
            opt(self.i_identity),
            opt(self.i1),
            fmt(self.i2),
            fmt(self.tol)
        )
    }
}

/// Number formatting shared by all reports.
pub fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Two-column text table with a title line.
pub fn term_table(title: &str, rows: &[(String, String)]) -> String {
    let w = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut s = format!("# {title}\n");
    for (k, v) in rows {
        s.push_str(&format!("{k:<w$}  {v}\n"));
    }
    s
}

/// Poisson solutions and `Ω`-independent pairings of a patch state, from
/// which reports for any `Ω` follow cheaply (`𝓘` is affine in `Ω`).
#[derive(Debug, Clone)]
pub struct VariationContext {
    weights: Vec<f64>,
    alpha: f64,
    areas: Vec<f64>,
    solutions: Vec<PoissonSolution>,
    /// `Σα_i∫∇φ_i·∇(ω * K)` by volume quadrature (`None` if skipped).
    pair_psi: Option<f64>,
    /// `Σα_i∫∇φ_i·x` by volume quadrature.
    pair_x: f64,
    cross: f64,
    boundary_nodes: usize,
}

/// Options of [`VariationContext::new`].
#[derive(Debug, Clone, Copy)]
pub struct VariationOptions {
    /// Poisson discretization.
    pub poisson: PoissonOptions,
    /// Evaluate the volume quadrature (the costly path).
    pub quadrature: bool,
}

impl Default for VariationOptions {
    fn default() -> Self {
        Self { poisson: PoissonOptions::default(), quadrature: true }
    }
}

impl VariationContext {
    /// Solves the constrained problem on every component of the state's
    /// patch and evaluates the pairings.
    pub fn new(state: &RotatingState, opts: VariationOptions) -> Result<Self> {
        let Density::Patch { patch, weights } = &state.density else {
            return Err(Error::Domain("the first variation is defined for patch states".into()));
        };
        let comps: Vec<Patch> = patch.components.iter().map(|c| Patch::single(c.clone())).collect();
        let solutions = comps
            .par_iter()
            .map(|c| solve_constrained_with(c, opts.poisson))
            .collect::<Result<Vec<_>>>()?;
        let areas = solutions.iter().map(|s| s.area).collect();
        let pair_psi = if opts.quadrature {
            let conv = state.convolver()?;
            let mut total = 0.0;
            for (s, w) in solutions.iter().zip(weights) {
                total += w * pairing(&s.mesh, |t| s.mesh.gradient(t, &s.p), |q| conv.gradient(q));
            }
            Some(total)
        } else {
            None
        };
        let mut pair_x = 0.0;
        for (s, w) in solutions.iter().zip(weights) {
            pair_x += w * (s.second_moment() + s.gradient_moment());
        }
        // Cross terms: c_ik ∫_{∂h_ik} ∇ψ_j·ν, ν the outward normal of D_i.
        let mut cross = 0.0;
        if comps.len() > 1 && solutions.iter().any(|s| !s.hole_constants.is_empty()) {
            let convs = comps
                .iter()
                .map(|c| Convolver::for_indicator(c, KernelSpec::newtonian(), state.boundary_nodes))
                .collect::<Result<Vec<_>>>()?;
            for (i, s) in solutions.iter().enumerate() {
                for (j, cj) in convs.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    for (k, c) in s.hole_constants.iter().enumerate() {
                        let flux = hole_flux(&s.mesh, (k + 1) as i32, |y| cj.gradient(y));
                        cross += weights[i] * weights[j] * c * flux;
                    }
                }
            }
        }
        Ok(Self {
            weights: weights.clone(),
            alpha: state.kernel.alpha,
            areas,
            solutions,
            pair_psi,
            pair_x,
            cross,
            boundary_nodes: state.boundary_nodes,
        })
    }

    /// The Poisson solution of each component.
    pub fn solutions(&self) -> &[PoissonSolution] {
        &self.solutions
    }

    /// Report at angular velocity `omega`.
    pub fn report(&self, omega: f64) -> VariationReport {
        let w = &self.weights;
        let mass: f64 = w.iter().zip(&self.areas).map(|(a, d)| a * d).sum();
        let scale = mass * mass / (4.0 * PI);
        let newtonian = self.alpha == 0.0;
        let (mut moment, mut p_term, mut hole, mut self_p, mut i2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (s, &a) in self.solutions.iter().zip(w) {
            let ip = s.integral_p();
            let ch: f64 = s.hole_constants.iter().zip(&s.hole_areas).map(|(c, h)| c * h).sum();
            let x2 = s.second_moment();
            moment += omega * a * x2;
            p_term += a * (2.0 * omega - a) * ip;
            hole += 2.0 * omega * a * ch;
            self_p += a * a * ip;
            i2 += a * (x2 - 2.0 * ip - 2.0 * ch);
        }
        let terms = VariationTerms { area_term: scale, moment_term: moment, p_term, hole_term: hole, cross_terms: self.cross };
        let i_identity = scale - moment + p_term + hole + self.cross;
        let i1 = scale - self_p + self.cross;
        VariationReport {
            omega,
            alpha: self.alpha,
            i_boundary: self.pair_psi.map_or(f64::NAN, |a| a - omega * self.pair_x),
            i_identity: newtonian.then_some(i_identity),
            terms: newtonian.then_some(terms),
            i1: newtonian.then_some(i1),
            i2,
            scale,
            tol: VARIATION_REL_TOL * scale,
            edge_target: self.solutions.iter().map(|s| s.mesh.edge_target).fold(f64::INFINITY, f64::min),
            boundary_nodes: self.boundary_nodes,
        }
    }
}

/// `∫_{∂h} F·ν dσ` over the boundary component `tag` of a mesh, `ν` the
/// outward normal of the meshed domain.
fn hole_flux(m: &Mesh, tag: i32, f: impl Fn(Point) -> [f64; 2]) -> f64 {
    let g = gauss4();
    let mut total = 0.0;
    for (i, j, t) in m.boundary_edges() {
        if t != tag {
            continue;
        }
        let (a, b) = (m.points[i], m.points[j]);
        // Domain on the left of a → b, so the outward normal is on the right.
        let nu = [b[1] - a[1], a[0] - b[0]];
        total += g.integrate(0.0, 1.0, |s| {
            let v = f([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            v[0] * nu[0] + v[1] * nu[1]
        });
    }
    total
}

/// Both evaluations of `𝓘` for a patch state at default resolution.
pub fn first_variation(state: &RotatingState) -> Result<VariationReport> {
    Ok(VariationContext::new(state, VariationOptions::default())?.report(state.omega))
}

/// Sign predicted by the rigidity theorems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpectedSign {
    /// `𝓘 > 0`.
    Positive,
    /// `𝓘 < 0`.
    Negative,
    /// `𝓘 = 0` (radial equality case).
    Zero,
    /// No prediction for this `Ω`.
    Undetermined,
}

/// Comparison of the observed sign of `𝓘` with the theory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidityVerdict {
    /// Predicted sign.
    pub expected: ExpectedSign,
    /// `+1`, `−1`, or `0` when `|𝓘| ≤ tol`.
    pub observed: i8,
    /// Whether observation and prediction agree.
    pub consistent: bool,
    /// Human-readable conclusion.
    pub conclusion: String,
}

fn is_centered(c: Point) -> bool {
    c[0].abs() <= 1e-12 && c[1].abs() <= 1e-12
}

/// Sign prediction for a patch.  Disks and concentric annuli centred at the
/// origin are rotating for every `Ω`; any disk or annulus is stationary at
/// `Ω = 0`.  Otherwise `Ω ≤ 0` forces `𝓘 > 0`, and `Ω ≥ 1/2` forces
/// `𝓘 < 0` for simply connected patches.
pub fn expected_sign(patch: &Patch, omega: f64) -> ExpectedSign {
    let radial_about = |s: &Shape| match s {
        Shape::Disk { center, .. } | Shape::Annulus { center, .. } => Some(*center),
        _ => None,
    };
    if patch.components.len() == 1 {
        if let Some(c) = radial_about(&patch.components[0]) {
            if is_centered(c) || omega == 0.0 {
                return ExpectedSign::Zero;
            }
        }
    }
    let simply_connected = patch.components.iter().all(|s| s.hole_count() == 0);
    if omega <= 0.0 {
        ExpectedSign::Positive
    } else if omega >= 0.5 && simply_connected {
        ExpectedSign::Negative
    } else {
        ExpectedSign::Undetermined
    }
}

/// Compares the identity value (or the quadrature when the identity is
/// unavailable) with the predicted sign.
pub fn rigidity_verdict(patch: &Patch, report: &VariationReport) -> RigidityVerdict {
    let i = report.best();
    let observed = if i > report.tol {
        1
    } else if i < -report.tol {
        -1
    } else {
        0
    };
    let expected = expected_sign(patch, report.omega);
    let consistent = match expected {
        ExpectedSign::Positive => observed == 1,
        ExpectedSign::Negative => observed == -1,
        ExpectedSign::Zero => observed == 0,
        ExpectedSign::Undetermined => true,
    };
    let conclusion = match (expected, consistent) {
        (ExpectedSign::Zero, true) => "radial equality case: I vanishes".to_string(),
        (ExpectedSign::Undetermined, _) => format!("no sign prediction for Omega = {}", report.omega),
        (_, true) => format!("I has the sign forced on non-radial patches ({expected:?}); not a rotating solution"),
        (_, false) => format!("observed sign {observed} contradicts the predicted {expected:?}"),
    };
    RigidityVerdict { expected, observed, consistent, conclusion }
}

/// Stability estimate `|D △ B| ≤ 2√(2δ)|D|`, `δ = 1/2 − Ω`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `1/2 − Ω`.
    pub delta: f64,
    /// `2√(2δ)|D|`.
    pub bound: f64,
    /// `|D △ B|` with `B` the origin-centred disk of equal area.
    pub measured: f64,
    /// `measured ≤ bound`.
    pub pass: bool,
    /// Largest oscillation of `f_Ω` over the boundary components (the
    /// estimate is meaningful only when this is near zero).
    pub stationarity_oscillation: f64,
}

/// Evaluates the stability estimate for a simply connected patch.
pub fn stability_bound(patch: &Patch, omega: f64) -> Result<StabilityReport> {
    if !(omega > 0.25 && omega < 0.5) {
        return Err(Error::Domain(format!("stability bound needs 1/4 < Omega < 1/2, got {omega}")));
    }
    let patch = patch.normalized()?;
    if patch.components.iter().any(|s| s.hole_count() > 0) {
        return Err(Error::Domain("stability bound needs a simply connected patch".into()));
    }
    let area = measures(&patch)?.area;
    let delta = 0.5 - omega;
    let bound = 2.0 * (2.0 * delta).sqrt() * area;
    let disk = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: (area / PI).sqrt() });
    let measured = symmetric_difference(&patch, &disk)?;
    let state = RotatingState::patch(patch, omega, KernelSpec::newtonian())?;
    let stationarity_oscillation = max_oscillation(&stationarity_residual(&state)?);
    Ok(StabilityReport { delta, bound, measured, pass: measured <= bound, stationarity_oscillation })
}

/// Semiaxes `(a, b)` of the Kirchhoff ellipse of area `π` rotating with
/// `Ω = ab/(a + b)²`; such ellipses exist only for `0 < Ω ≤ 1/4`.
pub fn kirchhoff_axes(omega: f64) -> Result<(f64, f64)> {
    if !(omega > 0.0 && omega <= 0.25) {
        return Err(Error::Domain(format!("Kirchhoff ellipses rotate with 0 < Omega <= 1/4, got {omega}")));
    }
    // q = b/a solves q/(1 + q)² = Ω.
    let q = (1.0 - 2.0 * omega - (1.0 - 4.0 * omega).max(0.0).sqrt()) / (2.0 * omega);
    Ok((1.0 / q.sqrt(), q.sqrt()))
}

/// The exterior functional on `B_R ∖ D̄` and its decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExteriorReport {
    /// Truncation radius.
    pub r: f64,
    /// `R₀ = max_{x∈D}|x|`.
    pub r0: f64,
    /// Angular velocity.
    pub omega: f64,
    /// `𝓘_R = ∫_{B_R∖D̄} ∇f_Ω·∇φ^R` by volume quadrature.
    pub i_r: f64,
    /// `∫_{∂B_R} f_Ω ∂_nφ_{0,R} dσ` (the other components contribute zero
    /// for rotating solutions).
    pub i_r_outer: f64,
    /// `𝓙¹_R = J₁₁ + J₁₂`.
    pub j_r1: f64,
    /// `J₁₁ = (|D_{0,R}| + Σ|U_i|)²/4π`.
    pub j11: f64,
    /// `J₁₂ = ∫∇(1_{B_R∖D̄} * 𝒩)·∇p^R`, as `𝓙¹_R − J₁₁`.
    pub j12: f64,
    /// `𝓙²_R = ∫x·∇φ^R`.
    pub j_r2: f64,
    /// `|𝓘_R + 𝓙¹_R + ((2Ω − 1)/2)𝓙²_R|`.
    pub decomposition_error: f64,
    /// Number of components of `V = B_R ∖ D_{0,R}`.
    pub n_components: usize,
    /// Number of bounded components `U_i` of `B_R ∖ D̄`.
    pub n_inner: usize,
    /// `max |∂_nφ_{0,R}|` over the nodes of `∂B_R`.
    pub outer_gradient_max: f64,
    /// `N R₀²/(2R log(R/R₀))`.
    pub outer_gradient_bound: f64,
    /// Tolerance on the gradient bound.
    pub outer_gradient_tol: f64,
    /// `max ≤ bound + tol`.
    pub outer_gradient_pass: bool,
    /// Mesh spacing on the boundary of `V`.
    pub edge_target: f64,
}

impl ExteriorReport {
    /// CSV header matching [`ExteriorReport::csv_row`].
    pub const CSV_HEADER: &'static str =
        "R,R0,omega,edge_target,I_R,I_R_outer,J_R1,J11,J12,J_R2,decomposition_error,grad_max,grad_bound,grad_pass\n";

    /// One CSV row.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt(self.r),
            fmt(self.r0),
            fmt(self.omega),
            fmt(self.edge_target),
            fmt(self.i_r),
            fmt(self.i_r_outer),
            fmt(self.j_r1),
            fmt(self.j11),
            fmt(self.j12),
            fmt(self.j_r2),
            fmt(self.decomposition_error),
            fmt(self.outer_gradient_max),
            fmt(self.outer_gradient_bound),
            self.outer_gradient_pass
        )
    }
}

fn reversed(pts: &[Point]) -> Vec<Point> {
    pts.iter().rev().copied().collect()
}

fn circle(r: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// A closed loop with the analytic curve it samples, if any.
type CurvedLoop = (Vec<Point>, Option<ExactCurve>);

/// Splits `B_R ∖ D̄` into `D_{0,R}` (touching `∂B_R`) and the bounded
/// components `U_i`: returns the outer loops of `V`'s components and, per
/// `U_i`, its outer loop (counter-clockwise) and holes (clockwise).
fn exterior_pieces(comps: &[(Vec<Loop>, Vec<Option<ExactCurve>>)]) -> (Vec<CurvedLoop>, Vec<(CurvedLoop, Vec<CurvedLoop>)>) {
    let mut outers: Vec<CurvedLoop> = Vec::new();
    let mut holes: Vec<CurvedLoop> = Vec::new();
    for (loops, curves) in comps {
        for (l, c) in loops.iter().zip(curves) {
            if l.is_hole {
                holes.push((l.pts.clone(), *c));
            } else {
                outers.push((l.pts.clone(), *c));
            }
        }
    }
    let inside = |p: &[Point], h: &[Point]| crate::geometry::point_in_loop(p[0], h);
    // Components lying in some hole of another component are not part of ∂V.
    let top = outers.iter().filter(|o| !holes.iter().any(|h| inside(&o.0, &h.0))).cloned().collect();
    let mut inner = Vec::new();
    for (k, h) in holes.iter().enumerate() {
        // Components directly inside this hole (not inside a smaller hole within it).
        let direct = outers
            .iter()
            .filter(|o| inside(&o.0, &h.0))
            .filter(|o| !holes.iter().enumerate().any(|(k2, h2)| k2 != k && inside(&o.0, &h2.0) && inside(&h2.0, &h.0)))
            .map(|o| (reversed(&o.0), o.1))
            .collect();
        inner.push(((reversed(&h.0), h.1), direct));
    }
    (top, inner)
}

/// Meshes the region inside `outer` minus `holes`, snapping nodes of
/// analytic loops onto their curves.
fn mesh_curved(outer: &CurvedLoop, holes: &[CurvedLoop], loop_h: &[f64], grading: f64, max_h: f64) -> Result<Mesh> {
    let hp: Vec<Vec<Point>> = holes.iter().map(|h| h.0.clone()).collect();
    let mut m = Mesh::from_loops_graded(&outer.0, &hp, loop_h, grading, max_h)?;
    for (tag, c) in std::iter::once(&outer.1).chain(holes.iter().map(|h| &h.1)).enumerate() {
        if let Some(c) = c {
            m.snap_boundary(tag as i32, c)?;
        }
    }
    Ok(m)
}

/// Discretization of the exterior experiment.
#[derive(Debug, Clone, Copy)]
pub struct ExteriorOptions {
    /// Boundary nodes on `∂V` (spacing `|∂D|/boundary_nodes`).
    pub boundary_nodes: usize,
    /// Growth rate of the element size away from `∂V`.
    pub grading: f64,
    /// Largest element size as a fraction of `R`.
    pub max_h_ratio: f64,
}

impl Default for ExteriorOptions {
    fn default() -> Self {
        Self { boundary_nodes: crate::geometry::DEFAULT_BOUNDARY_NODES, grading: 0.15, max_h_ratio: 0.05 }
    }
}

/// Exterior functional at default resolution.
pub fn exterior_first_variation(patch: &Patch, omega: f64, r: f64) -> Result<ExteriorReport> {
    exterior_first_variation_with(patch, omega, r, ExteriorOptions::default())
}

/// Exterior functional of a Newtonian patch on `B_R ∖ D̄`.
pub fn exterior_first_variation_with(patch: &Patch, omega: f64, r: f64, opts: ExteriorOptions) -> Result<ExteriorReport> {
    let patch = patch.normalized()?;
    let m = measures(&patch)?;
    let r0 = m.r_max;
    if !(r > 2.0 * r0) {
        return Err(Error::Domain(format!("need R > 2 R0 = {} (D touches or nearly touches the truncation), got R = {r}", 2.0 * r0)));
    }
    let n_nodes = opts.boundary_nodes.max(16);
    let per: f64 = patch.components.iter().flat_map(|s| s.loops(4 * n_nodes)).map(|l| crate::geometry::loop_perimeter(&l.pts)).sum();
    let h = per / n_nodes as f64;
    let n_loop = |s: &Shape| match s {
        Shape::Disk { radius, .. } => ((2.0 * PI * radius / h).ceil() as usize).max(32),
        Shape::Annulus { r_outer, .. } => ((2.0 * PI * r_outer / h).ceil() as usize).max(32),
        _ => n_nodes,
    };
    let comps: Vec<(Vec<Loop>, Vec<Option<ExactCurve>>)> =
        patch.components.iter().map(|s| (s.loops(n_loop(s)), ExactCurve::of_shape(s))).collect();
    let (top, inner) = exterior_pieces(&comps);
    let max_h = (opts.max_h_ratio * r).max(h);
    let h_out = (0.5 * max_h).max(h);
    let n_out = ((2.0 * PI * r / h_out).ceil() as usize).max(64);
    let holes_d0: Vec<CurvedLoop> = top.iter().map(|o| (reversed(&o.0), o.1)).collect();
    let mut loop_h = vec![h_out];
    loop_h.extend(std::iter::repeat(h).take(holes_d0.len()));
    let outer = (circle(r, n_out), Some(ExactCurve::circle([0.0, 0.0], r)));
    let mesh0 = mesh_curved(&outer, &holes_d0, &loop_h, opts.grading, max_h)?;
    let mut sols: Vec<HarmonicSolution> = vec![solve_harmonic_on_mesh(mesh0)?];
    for (outer, holes) in &inner {
        let lh = vec![h; 1 + holes.len()];
        sols.push(solve_harmonic_on_mesh(mesh_curved(outer, holes, &lh, opts.grading, max_h.min(0.1 * r0))?)?);
    }

    let conv = Convolver::for_indicator(&patch, KernelSpec::newtonian(), n_nodes)?;
    let (mut i_r, mut j_r2, mut j_r1, mut area_e) = (0.0, 0.0, 0.0, 0.0);
    for s in &sols {
        let mm = &s.mesh;
        let gpsi = midpoint_values(mm, |q| conv.gradient(q));
        let (a, b, c) = mm.triangles.iter().zip(&gpsi).fold((0.0, 0.0, 0.0), |(a, b, c), (t, gv)| {
            let g = s.grad_phi(t);
            let w = mm.area_of(t) / 3.0;
            let (mut da, mut db, mut dc) = (0.0, 0.0, 0.0);
            for (q, gp) in midpoints(mm, t).into_iter().zip(gv) {
                // ∇f_Ω = ∇ψ_D − Ωx; ∇(1_E * 𝒩) = x/2 − ∇ψ_D in B_R; x + ∇p = ∇φ.
                da += w * (g[0] * (gp[0] - omega * q[0]) + g[1] * (gp[1] - omega * q[1]));
                db += w * (g[0] * q[0] + g[1] * q[1]);
                dc += w * (g[0] * (0.5 * q[0] - gp[0]) + g[1] * (0.5 * q[1] - gp[1]));
            }
            (a + da, b + db, c + dc)
        });
        i_r += a;
        j_r2 += b;
        j_r1 += c;
        area_e += mm.area();
    }
    // J11 in closed form; J12 by difference, so the large, nearly
    // cancelling pair never enters J_R¹ itself.
    let j11 = area_e * area_e / (4.0 * PI);
    let j12 = j_r1 - j11;
    let decomposition_error = (i_r + j_r1 + 0.5 * (2.0 * omega - 1.0) * j_r2).abs();

    let s0 = &sols[0];
    let dn = s0.normal_derivative(OUTER);
    let blen = crate::poisson::nodal_boundary_length(&s0.mesh);
    let mut i_r_outer = 0.0;
    let mut grad_max: f64 = 0.0;
    for &(node, d) in &dn {
        let x = s0.mesh.points[node];
        let f = conv.value(x) - 0.5 * omega * (x[0] * x[0] + x[1] * x[1]);
        i_r_outer += f * d * blen[node];
        grad_max = grad_max.max(d.abs());
    }
    let n_comp = top.len();
    let bound = n_comp as f64 * r0 * r0 / (2.0 * r * (r / r0).ln());
    let (ts, _) = solver_tolerance(n_nodes)?;
    let tol = ts * bound;
    Ok(ExteriorReport {
        r,
        r0,
        omega,
        i_r,
        i_r_outer,
        j_r1,
        j11,
        j12,
        j_r2,
        decomposition_error,
        n_components: n_comp,
        n_inner: inner.len(),
        outer_gradient_max: grad_max,
        outer_gradient_bound: bound,
        outer_gradient_tol: tol,
        outer_gradient_pass: grad_max <= bound + tol,
        edge_target: h,
    })
}

/// Least-squares decay exponent `γ` of `|y| ≈ C R^{−γ}`.
pub fn decay_exponent(r: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().max(f64::MIN_POSITIVE).ln()).collect();
    -crate::quad::linear_fit(&lx, &ly).1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn newtonian(patch: Patch, omega: f64) -> RotatingState {
        RotatingState::patch(patch, omega, KernelSpec::newtonian()).unwrap()
    }

    #[test]
    fn kirchhoff_axes_invert_the_angular_velocity() {
        let (a, b) = kirchhoff_axes(2.0 / 9.0).unwrap();
        assert!((a - 2f64.sqrt()).abs() < 1e-12 && (b - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(kirchhoff_axes(0.3).is_err());
    }

    #[test]
    fn delta_one_eighth_gives_the_area() {
        let disk = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
        let r = stability_bound(&disk, 0.375).unwrap();
        assert!((r.bound - PI).abs() < 1e-12);
        assert!(r.measured < 1e-9 && r.pass);
    }

    #[test]
    fn disk_variation_vanishes_both_ways() {
        let disk = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
        let ctx = VariationContext::new(&newtonian(disk, 0.0), VariationOptions::default()).unwrap();
        for omega in [-1.0, 0.0, 0.5, 2.0] {
            let r = ctx.report(omega);
            assert!(r.i_identity.unwrap().abs() < r.tol, "{r:?}");
            assert!(r.i_boundary.abs() < r.tol, "{r:?}");
        }
    }

    #[test]
    fn offset_disk_identity_matches_closed_form() {
        // I = |D|²/4π − Ω∫|x|² + (2Ω − 1)∫p with ∫|x|² = π/2 + πd², ∫p = π/4.
        let d = 0.5;
        let disk = Patch::single(Shape::Disk { center: [d, 0.0], radius: 1.0 });
        let ctx = VariationContext::new(&newtonian(disk, -0.5), VariationOptions { quadrature: false, ..Default::default() }).unwrap();
        let r = ctx.report(-0.5);
        let exact = PI / 4.0 + 0.5 * (PI / 2.0 + PI * d * d) - 2.0 * PI / 4.0;
        assert!((r.i_identity.unwrap() - exact).abs() < 1e-3, "{} {exact}", r.i_identity.unwrap());
    }
}
