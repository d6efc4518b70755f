//! Boundary curves with panel quadrature.
//!
//! A [`BoundaryComponent`] is one closed boundary curve of a patch, oriented
//! so that the patch lies on its left (outer curves counter-clockwise, hole
//! curves clockwise).  The curve is split into panels (polygon edges or
//! parameter-equispaced ellipse arcs).  Line integrals are computed panel by
//! panel with Gauss–Legendre rules.  Panels close to a target point are
//! bisected recursively, so integrands with an integrable singularity at
//! the target are handled even when the target lies on the curve.

use std::f64::consts::PI;

use super::{point_segment_distance, Point};
use crate::quad::{gauss16, gauss4, gauss8, GaussRule};

/// Maximum bisection depth of near-singular panels.
const MAX_DEPTH: u32 = 30;
/// Panels farther than this many lengths from the target use 4 points.
const FAR4: f64 = 8.0;

/// Precomputed geometry of one panel: bounding segment, sagitta and the
/// far-field quadrature nodes `(y, dy)`.
#[derive(Debug, Clone, PartialEq)]
struct PanelCache {
    p0: Point,
    p1: Point,
    sag: f64,
    len: f64,
    g4: [(Point, Point); 4],
    g8: [(Point, Point); 8],
}

/// Geometry of a closed curve.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    /// Closed polygon; the last vertex connects back to the first.
    Polyline(Vec<Point>),
    /// Ellipse `center + R(angle)(a cos t, b sin t)`; `ccw` selects the
    /// direction of traversal.
    Ellipse {
        /// Center.
        center: Point,
        /// Semiaxis along the rotated first axis.
        a: f64,
        /// Semiaxis along the rotated second axis.
        b: f64,
        /// Rotation angle.
        angle: f64,
        /// Counter-clockwise traversal.
        ccw: bool,
        /// Number of arc panels.
        panels: usize,
    },
}

/// One closed boundary curve with node-based and panel-based quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryComponent {
    /// The exact curve.
    pub curve: Curve,
    /// True for hole boundaries (traversed clockwise).
    pub is_hole: bool,
    /// Panel end points; closed, so the first node is repeated at the end.
    pub nodes: Vec<Point>,
    /// Trapezoidal arc-length weights of the distinct nodes
    /// (`nodes.len() − 1` entries summing to the curve length).
    pub weights: Vec<f64>,
    /// Total length.
    pub length: f64,
    cache: Vec<PanelCache>,
}

impl BoundaryComponent {
    /// Closed polygonal curve through `pts` (not repeated at the end); the
    /// points must already be oriented with the patch on the left.
    pub fn polyline(pts: Vec<Point>, is_hole: bool) -> Self {
        let mut nodes = pts.clone();
        if let Some(&p) = pts.first() {
            nodes.push(p);
        }
        Self::finish(Curve::Polyline(pts), is_hole, nodes)
    }

    /// Ellipse boundary with `n` arc panels; `ccw = false` gives a hole.
    pub fn ellipse(center: Point, a: f64, b: f64, angle: f64, ccw: bool, n: usize) -> Self {
        let curve = Curve::Ellipse { center, a, b, angle, ccw, panels: n };
        let mut c = Self::finish(curve, !ccw, Vec::new());
        c.nodes = (0..=n).map(|i| c.eval(i.min(n - 1), if i == n { 1.0 } else { 0.0 }).0).collect();
        c.nodes[n] = c.nodes[0];
        c.length = (0..n).map(|i| c.panel_length(i)).sum();
        c.weights = node_weights(&c, n);
        c.cache = (0..n).map(|i| c.panel_cache(i)).collect();
        c
    }

    fn finish(curve: Curve, is_hole: bool, nodes: Vec<Point>) -> Self {
        let mut c = Self { curve, is_hole, nodes, weights: Vec::new(), length: 0.0, cache: Vec::new() };
        let n = c.panel_count();
        if n > 0 && !c.nodes.is_empty() {
            c.length = (0..n).map(|i| c.panel_length(i)).sum();
            c.weights = node_weights(&c, n);
            c.cache = (0..n).map(|i| c.panel_cache(i)).collect();
        }
        c
    }

    fn panel_cache(&self, i: usize) -> PanelCache {
        let (p0, p1, sag, len) = self.panel_bounds(i, 0.0, 1.0);
        let nodes = |r: &GaussRule, k: usize| {
            let (y, d) = self.eval(i, r.nodes[k]);
            (y, [d[0] * r.weights[k], d[1] * r.weights[k]])
        };
        PanelCache {
            p0,
            p1,
            sag,
            len,
            g4: std::array::from_fn(|k| nodes(gauss4(), k)),
            g8: std::array::from_fn(|k| nodes(gauss8(), k)),
        }
    }

    /// End points, sagitta and a length bound of the sub-panel `[a, b]`.
    fn panel_bounds(&self, i: usize, a: f64, b: f64) -> (Point, Point, f64, f64) {
        let p0 = self.eval(i, a).0;
        let p1 = self.eval(i, b).0;
        let pm = self.eval(i, 0.5 * (a + b)).0;
        let chord = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
        let sag = (pm[0] - 0.5 * (p0[0] + p1[0])).hypot(pm[1] - 0.5 * (p0[1] + p1[1]));
        (p0, p1, sag, chord + 2.0 * sag)
    }

    /// Number of panels.
    pub fn panel_count(&self) -> usize {
        match &self.curve {
            Curve::Polyline(p) => p.len(),
            Curve::Ellipse { panels, .. } => *panels,
        }
    }

    /// Distinct nodes (without the closing repeat).
    pub fn distinct_nodes(&self) -> &[Point] {
        &self.nodes[..self.nodes.len().saturating_sub(1)]
    }

    /// Point and derivative `dy/ds` at local parameter `s ∈ [0, 1]` of
    /// panel `i`.
    #[inline]
    pub fn eval(&self, i: usize, s: f64) -> (Point, Point) {
        match &self.curve {
            Curve::Polyline(p) => {
                let (a, b) = (p[i], p[(i + 1) % p.len()]);
                let d = [b[0] - a[0], b[1] - a[1]];
                ([a[0] + s * d[0], a[1] + s * d[1]], d)
            }
            Curve::Ellipse { center, a, b, angle, ccw, panels } => {
                let dt = 2.0 * PI / *panels as f64 * if *ccw { 1.0 } else { -1.0 };
                let t = i as f64 * dt + s * dt;
                let (st, ct) = t.sin_cos();
                let (sa, ca) = angle.sin_cos();
                let (x, y) = (a * ct, b * st);
                let (dx, dy) = (-a * st * dt, b * ct * dt);
                (
                    [center[0] + ca * x - sa * y, center[1] + sa * x + ca * y],
                    [ca * dx - sa * dy, sa * dx + ca * dy],
                )
            }
        }
    }

    /// Length of panel `i` (exact for segments, 16-point Gauss for arcs).
    pub fn panel_length(&self, i: usize) -> f64 {
        match &self.curve {
            Curve::Polyline(_) => {
                let d = self.eval(i, 0.0).1;
                d[0].hypot(d[1])
            }
            Curve::Ellipse { .. } => gauss16().integrate(0.0, 1.0, |s| {
                let d = self.eval(i, s).1;
                d[0].hypot(d[1])
            }),
        }
    }

    /// Signed enclosed area `½∮(x dy − y dx)`: positive for outer curves,
    /// negative for holes.
    pub fn signed_area(&self) -> f64 {
        self.integrate_regular(|y, dy| [0.5 * (y[0] * dy[1] - y[1] * dy[0])])[0]
    }

    /// `∮ f(y, dy)` with a 16-point rule per panel, for integrands smooth on
    /// the curve.  `dy` is the tangent scaled by the quadrature weight, so
    /// the outward normal element of the patch is `ν dσ = (dy₁, −dy₀)`.
    pub fn integrate_regular<const N: usize>(&self, mut f: impl FnMut(Point, Point) -> [f64; N]) -> [f64; N] {
        let mut acc = [0.0; N];
        for i in 0..self.panel_count() {
            apply_rule(self, i, 0.0, 1.0, gauss16(), &mut f, &mut acc);
        }
        acc
    }

    /// `∮ f(y, dy)` for integrands that may be (integrably) singular at the
    /// target `x`: panels within one panel length of `x` are bisected
    /// recursively, nearby panels use 16 points and far panels 4 points.
    pub fn integrate_near<const N: usize>(&self, x: Point, mut f: impl FnMut(Point, Point) -> [f64; N]) -> [f64; N] {
        let mut acc = [0.0; N];
        for (i, pc) in self.cache.iter().enumerate() {
            let dist = point_segment_distance(x, pc.p0, pc.p1) - pc.sag;
            if dist >= FAR4 * pc.len {
                accumulate(&pc.g4, &mut f, &mut acc);
            } else if dist >= 3.0 * pc.len {
                accumulate(&pc.g8, &mut f, &mut acc);
            } else {
                self.adaptive_panel(i, 0.0, 1.0, x, &mut f, &mut acc, 0);
            }
        }
        acc
    }

    #[allow(clippy::too_many_arguments)]
    fn adaptive_panel<const N: usize>(
        &self,
        i: usize,
        a: f64,
        b: f64,
        x: Point,
        f: &mut impl FnMut(Point, Point) -> [f64; N],
        acc: &mut [f64; N],
        depth: u32,
    ) {
        let (p0, p1, sag, len) = self.panel_bounds(i, a, b);
        let dist = point_segment_distance(x, p0, p1) - sag;
        if dist >= 3.0 * len {
            apply_rule(self, i, a, b, gauss8(), f, acc);
        } else if dist >= len || depth >= MAX_DEPTH {
            apply_rule(self, i, a, b, gauss16(), f, acc);
        } else {
            let m = 0.5 * (a + b);
            self.adaptive_panel(i, a, m, x, f, acc, depth + 1);
            self.adaptive_panel(i, m, b, x, f, acc, depth + 1);
        }
    }

    /// Point of the curve farthest from the origin: the farthest node (ties
    /// broken by the smallest polar angle), refined on arcs by one Newton
    /// step on `|y|²` along the adjacent panels.
    pub fn farthest_from_origin(&self) -> Point {
        let nodes = self.distinct_nodes();
        let (k, _) = nodes
            .iter()
            .enumerate()
            .map(|(k, p)| (k, p[0].hypot(p[1])))
            .fold((0, f64::NEG_INFINITY), |best, (k, r)| {
                // Ties are broken by the smallest polar angle in [0, 2π).
                let ang = |p: Point| p[1].atan2(p[0]).rem_euclid(2.0 * PI);
                if r > best.1 + 1e-14 * r.abs().max(1.0)
                    || ((r - best.1).abs() <= 1e-14 * r.abs().max(1.0) && ang(nodes[k]) < ang(nodes[best.0]))
                {
                    (k, r)
                } else {
                    best
                }
            });
        match &self.curve {
            Curve::Polyline(_) => nodes[k],
            Curve::Ellipse { .. } => {
                // One Newton step on |y(s)|² along each adjacent panel,
                // started at the shared node.
                let n = self.panel_count();
                let mut best = nodes[k];
                for (i, s0) in [(k, 0.0), ((k + n - 1) % n, 1.0)] {
                    let h = 1e-4;
                    let g = |s: f64| {
                        let p = self.eval(i, s).0;
                        p[0] * p[0] + p[1] * p[1]
                    };
                    let d1 = (g(s0 + h) - g(s0 - h)) / (2.0 * h);
                    let d2 = (g(s0 + h) - 2.0 * g(s0) + g(s0 - h)) / (h * h);
                    if d2 < 0.0 {
                        let s = (s0 - d1 / d2).clamp(-1.0, 2.0);
                        let p = self.eval(i, s).0;
                        if p[0].hypot(p[1]) > best[0].hypot(best[1]) {
                            best = p;
                        }
                    }
                }
                best
            }
        }
    }
}

/// `∫_{[p,q]} f(y, dy)` over one segment, bisecting recursively toward
/// the target `x` exactly like [`BoundaryComponent::integrate_near`].
pub fn integrate_segment_near<const N: usize>(
    x: Point,
    p: Point,
    q: Point,
    f: &mut impl FnMut(Point, Point) -> [f64; N],
    acc: &mut [f64; N],
) {
    fn rec<const N: usize>(
        x: Point,
        p: Point,
        q: Point,
        f: &mut impl FnMut(Point, Point) -> [f64; N],
        acc: &mut [f64; N],
        depth: u32,
    ) {
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let dist = point_segment_distance(x, p, q);
        let rule = if dist >= FAR4 * len {
            Some(gauss4())
        } else if dist >= 3.0 * len {
            Some(gauss8())
        } else if dist >= len || depth >= MAX_DEPTH {
            Some(gauss16())
        } else {
            None
        };
        match rule {
            Some(r) => {
                let d = [q[0] - p[0], q[1] - p[1]];
                for (s, w) in r.nodes.iter().zip(&r.weights) {
                    let v = f([p[0] + s * d[0], p[1] + s * d[1]], [d[0] * w, d[1] * w]);
                    for k in 0..N {
                        acc[k] += v[k];
                    }
                }
            }
            None => {
                let m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                rec(x, p, m, f, acc, depth + 1);
                rec(x, m, q, f, acc, depth + 1);
            }
        }
    }
    rec(x, p, q, f, acc, 0);
}

#[inline]
fn accumulate<const N: usize>(nodes: &[(Point, Point)], f: &mut impl FnMut(Point, Point) -> [f64; N], acc: &mut [f64; N]) {
    for &(y, d) in nodes {
        let v = f(y, d);
        for k in 0..N {
            acc[k] += v[k];
        }
    }
}

fn apply_rule<const N: usize>(
    c: &BoundaryComponent,
    i: usize,
    a: f64,
    b: f64,
    rule: &GaussRule,
    f: &mut impl FnMut(Point, Point) -> [f64; N],
    acc: &mut [f64; N],
) {
    let len = b - a;
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        let (y, d) = c.eval(i, a + len * s);
        let v = f(y, [d[0] * w * len, d[1] * w * len]);
        for k in 0..N {
            acc[k] += v[k];
        }
    }
}

fn node_weights(c: &BoundaryComponent, n: usize) -> Vec<f64> {
    let lens: Vec<f64> = (0..n).map(|i| c.panel_length(i)).collect();
    (0..n).map(|i| 0.5 * (lens[i] + lens[(i + n - 1) % n])).collect()
}
