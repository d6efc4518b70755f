//! Planar patch representations, measures, boundary bands, sections and
//! asymmetry functionals.
//!
//! A [`Patch`] is a finite list of disjoint [`Shape`]s.  Polygons are the
//! canonical boundary representation; analytic disks, annuli and ellipses
//! carry exact formulas together with exact parametric boundaries; rasters
//! are cell-centred indicator samples on an axis-aligned grid.

mod asymmetry;
mod band;
mod boundary;
mod measures;
mod raster;
mod sections;

pub use asymmetry::{disk_intersection_area, fraenkel_asymmetry, fraenkel_asymmetry_with};
pub use band::{boundary_band, polygon_band_area, BandResult};
pub use boundary::{integrate_segment_near, BoundaryComponent, Curve};
pub use measures::{measures, polygon_area, polygon_centroid, polygon_second_moment, Measures};
pub use raster::{Grid, Raster};
pub use sections::{patch_section, sections, symmetric_difference, symmetric_difference_on, IntervalSet, Section};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane.
pub type Point = [f64; 2];

/// Default number of boundary nodes of polygonized analytic shapes.
pub const DEFAULT_BOUNDARY_NODES: usize = 512;

/// One connected region (possibly with holes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    /// Outer loop (counter-clockwise) and hole loops (clockwise).
    Polygon {
        /// Outer vertex loop, not repeated at the end.
        outer: Vec<Point>,
        /// Hole vertex loops.
        #[serde(default)]
        holes: Vec<Vec<Point>>,
    },
    /// Disk `B(center, radius)`.
    Disk {
        /// Center.
        center: Point,
        /// Radius.
        radius: f64,
    },
    /// Concentric annulus `r_inner < |x − center| < r_outer`.
    Annulus {
        /// Common center.
        center: Point,
        /// Hole radius.
        r_inner: f64,
        /// Outer radius.
        r_outer: f64,
    },
    /// Ellipse with semiaxes `a ≥ b`, major axis rotated by `angle`.
    Ellipse {
        /// Center.
        center: Point,
        /// Major semiaxis.
        a: f64,
        /// Minor semiaxis.
        b: f64,
        /// Rotation of the major axis (radians).
        #[serde(default)]
        angle: f64,
    },
    /// Cell-centred indicator raster.
    Raster(Raster),
}

/// A planar region: a list of pairwise disjoint shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// Disjoint components.
    pub components: Vec<Shape>,
}

impl Serialize for Patch {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.components.len() == 1 {
            self.components[0].serialize(s)
        } else {
            #[derive(Serialize)]
            struct Multi<'a> {
                components: &'a [Shape],
            }
            Multi { components: &self.components }.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Patch {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        // Dispatch on the `components` key by hand so that field errors of
        // the shape itself reach the user instead of a generic mismatch.
        let mut v = serde_json::Value::deserialize(d)?;
        let components = match v.get_mut("components") {
            Some(list) => Vec::<Shape>::deserialize(list.take()),
            None => Shape::deserialize(v).map(|s| vec![s]),
        };
        components.map(|components| Patch { components }).map_err(D::Error::custom)
    }
}

fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let orient = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn loop_is_simple(pts: &[Point]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn loops_cross(a: &[Point], b: &[Point]) -> bool {
    for i in 0..a.len() {
        for j in 0..b.len() {
            if segments_intersect(a[i], a[(i + 1) % a.len()], b[j], b[(j + 1) % b.len()]) {
                return true;
            }
        }
    }
    false
}

/// Even–odd point-in-loop test.
pub fn point_in_loop(p: Point, pts: &[Point]) -> bool {
    let n = pts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

fn ellipse_point(center: Point, a: f64, b: f64, angle: f64, t: f64) -> Point {
    let (s, c) = angle.sin_cos();
    let (x, y) = (a * t.cos(), b * t.sin());
    [center[0] + c * x - s * y, center[1] + s * x + c * y]
}

fn circle_loop(center: Point, r: f64, n: usize, ccw: bool) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let t = if ccw { t } else { -t };
            [center[0] + r * t.cos(), center[1] + r * t.sin()]
        })
        .collect()
}

/// Splits edges longer than `max_len` so that a loop is sampled finely.
pub fn refine_loop(pts: &[Point], max_len: f64) -> Vec<Point> {
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let k = (len / max_len).ceil().max(1.0) as usize;
        for j in 0..k {
            let t = j as f64 / k as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// A closed vertex loop together with its role.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    /// Vertices (not repeated at the end).
    pub pts: Vec<Point>,
    /// True for hole loops (clockwise).
    pub is_hole: bool,
}

impl Shape {
    /// Axis-aligned polygon (counter-clockwise) from its corners.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Shape::Polygon { outer: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]], holes: vec![] }
    }

    /// Builds a polygon, normalizing orientations and validating simplicity
    /// and nesting.
    pub fn polygon(outer: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let s = Shape::Polygon { outer, holes };
        s.normalized()
    }

    /// Checks the representation invariants and returns a copy with loop
    /// orientations normalized (outer counter-clockwise, holes clockwise).
    pub fn normalized(&self) -> Result<Self> {
        match self {
            Shape::Polygon { outer, holes } => {
                let (x0, y0, x1, y1) = loop_bbox(outer);
                let scale = (x1 - x0).max(y1 - y0).powi(2);
                if outer.len() < 3 || signed_area(outer).abs() < 10.0 * f64::EPSILON * scale || scale == 0.0 {
                    return Err(Error::DegenerateGeometry("outer loop has (numerically) zero area".into()));
                }
                if !loop_is_simple(outer) {
                    return Err(Error::DegenerateGeometry("outer loop is not simple".into()));
                }
                let mut o = outer.clone();
                if signed_area(&o) < 0.0 {
                    o.reverse();
                }
                let mut hs: Vec<Vec<Point>> = Vec::new();
                for (k, h) in holes.iter().enumerate() {
                    if h.len() < 3 || signed_area(h).abs() < 10.0 * f64::EPSILON * scale {
                        return Err(Error::DegenerateGeometry(format!("hole {k} is degenerate")));
                    }
                    if !loop_is_simple(h) || loops_cross(h, &o) || !h.iter().all(|&p| point_in_loop(p, &o)) {
                        return Err(Error::DegenerateGeometry(format!("hole {k} is not strictly inside the outer loop")));
                    }
                    for g in &hs {
                        if loops_cross(h, g) || point_in_loop(h[0], g) {
                            return Err(Error::DegenerateGeometry(format!("hole {k} meets another hole")));
                        }
                    }
                    let mut h = h.clone();
                    if signed_area(&h) > 0.0 {
                        h.reverse();
                    }
                    hs.push(h);
                }
                Ok(Shape::Polygon { outer: o, holes: hs })
            }
            Shape::Disk { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::DegenerateGeometry(format!("disk radius {radius}")));
                }
                Ok(self.clone())
            }
            Shape::Annulus { r_inner, r_outer, .. } => {
                if !(*r_inner > 0.0 && r_inner < r_outer) {
                    return Err(Error::DegenerateGeometry(format!("annulus radii {r_inner}, {r_outer}")));
                }
                Ok(self.clone())
            }
            Shape::Ellipse { a, b, .. } => {
                if !(*b > 0.0 && a >= b) {
                    return Err(Error::DegenerateGeometry(format!("ellipse semiaxes {a}, {b} (need a ≥ b > 0)")));
                }
                Ok(self.clone())
            }
            Shape::Raster(r) => {
                r.grid.validate()?;
                if r.cells.len() != r.grid.nx * r.grid.ny {
                    return Err(Error::Format("raster data length does not match nx·ny".into()));
                }
                if r.count() == 0 {
                    return Err(Error::DegenerateGeometry("empty raster".into()));
                }
                Ok(self.clone())
            }
        }
    }

    /// Point membership (open set for analytic shapes, cell-centre rule for
    /// rasters).
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Polygon { outer, holes } => point_in_loop(p, outer) && !holes.iter().any(|h| point_in_loop(p, h)),
            Shape::Disk { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) < *radius,
            Shape::Annulus { center, r_inner, r_outer } => {
                let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                r > *r_inner && r < *r_outer
            }
            Shape::Ellipse { center, a, b, angle } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                (u / a).powi(2) + (v / b).powi(2) < 1.0
            }
            Shape::Raster(r) => r.contains(p),
        }
    }

    /// Bounding box `(xmin, ymin, xmax, ymax)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Polygon { outer, .. } => loop_bbox(outer),
            Shape::Disk { center, radius: r } | Shape::Annulus { center, r_outer: r, .. } => {
                (center[0] - r, center[1] - r, center[0] + r, center[1] + r)
            }
            Shape::Ellipse { center, a, b, angle } => {
                let (s, c) = angle.sin_cos();
                let hx = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
                let hy = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
                (center[0] - hx, center[1] - hy, center[0] + hx, center[1] + hy)
            }
            Shape::Raster(r) => {
                let g = &r.grid;
                (g.origin[0], g.origin[1], g.origin[0] + g.nx as f64 * g.h, g.origin[1] + g.ny as f64 * g.h)
            }
        }
    }

    /// Polygonal loops with `n` nodes per analytic curve (outer CCW, holes CW).
    /// Rasters are traced along the marching-squares contour of the indicator.
    pub fn loops(&self, n: usize) -> Vec<Loop> {
        match self {
            Shape::Polygon { outer, holes } => {
                let mut v = vec![Loop { pts: outer.clone(), is_hole: false }];
                v.extend(holes.iter().map(|h| Loop { pts: h.clone(), is_hole: true }));
                v
            }
            Shape::Disk { center, radius } => vec![Loop { pts: circle_loop(*center, *radius, n, true), is_hole: false }],
            Shape::Annulus { center, r_inner, r_outer } => vec![
                Loop { pts: circle_loop(*center, *r_outer, n, true), is_hole: false },
                Loop { pts: circle_loop(*center, *r_inner, n, false), is_hole: true },
            ],
            Shape::Ellipse { center, a, b, angle } => {
                let pts = (0..n)
                    .map(|k| ellipse_point(*center, *a, *b, *angle, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
                    .collect();
                vec![Loop { pts, is_hole: false }]
            }
            Shape::Raster(r) => r.boundary_loops(),
        }
    }

    /// Polygon with `n` nodes per analytic curve.
    pub fn to_polygon(&self, n: usize) -> Shape {
        let loops = self.loops(n);
        let outer = loops.iter().find(|l| !l.is_hole).map(|l| l.pts.clone()).unwrap_or_default();
        let holes = loops.iter().filter(|l| l.is_hole).map(|l| l.pts.clone()).collect();
        Shape::Polygon { outer, holes }
    }

    /// Exact boundary curves; polygon edges are split so that the node
    /// count is roughly `n` per loop (at least 16 nodes per loop).
    pub fn boundary(&self, n: usize) -> Vec<BoundaryComponent> {
        let n = n.max(16);
        match self {
            Shape::Disk { center, radius } => {
                vec![BoundaryComponent::ellipse(*center, *radius, *radius, 0.0, true, n)]
            }
            Shape::Annulus { center, r_inner, r_outer } => vec![
                BoundaryComponent::ellipse(*center, *r_outer, *r_outer, 0.0, true, n),
                BoundaryComponent::ellipse(*center, *r_inner, *r_inner, 0.0, false, n),
            ],
            Shape::Ellipse { center, a, b, angle } => vec![BoundaryComponent::ellipse(*center, *a, *b, *angle, true, n)],
            _ => self
                .loops(n)
                .into_iter()
                .map(|l| {
                    let len = loop_perimeter(&l.pts);
                    let pts = refine_loop(&l.pts, len / n as f64 * 1.0001);
                    BoundaryComponent::polyline(pts, l.is_hole)
                })
                .collect(),
        }
    }

    /// Distance from `p` to the boundary of the shape.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            Shape::Disk { center, radius } => ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs(),
            Shape::Annulus { center, r_inner, r_outer } => {
                let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                (r - r_inner).abs().min((r - r_outer).abs())
            }
            Shape::Ellipse { .. } => ellipse_distance(self, p),
            _ => self
                .loops(DEFAULT_BOUNDARY_NODES)
                .iter()
                .map(|l| loop_distance(p, &l.pts))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Applies the rigid motion `x ↦ R(θ)x + t`.
    pub fn transformed(&self, theta: f64, t: Point) -> Shape {
        let (s, c) = theta.sin_cos();
        let m = |p: &Point| [c * p[0] - s * p[1] + t[0], s * p[0] + c * p[1] + t[1]];
        match self {
            Shape::Polygon { outer, holes } => Shape::Polygon {
                outer: outer.iter().map(m).collect(),
                holes: holes.iter().map(|h| h.iter().map(m).collect()).collect(),
            },
            Shape::Disk { center, radius } => Shape::Disk { center: m(center), radius: *radius },
            Shape::Annulus { center, r_inner, r_outer } => {
                Shape::Annulus { center: m(center), r_inner: *r_inner, r_outer: *r_outer }
            }
            Shape::Ellipse { center, a, b, angle } => Shape::Ellipse { center: m(center), a: *a, b: *b, angle: angle + theta },
            Shape::Raster(_) => self.to_polygon(DEFAULT_BOUNDARY_NODES).transformed(theta, t),
        }
    }

    /// Uniform dilation `x ↦ λx`.
    pub fn scaled(&self, lambda: f64) -> Shape {
        let m = |p: &Point| [lambda * p[0], lambda * p[1]];
        match self {
            Shape::Polygon { outer, holes } => Shape::Polygon {
                outer: outer.iter().map(m).collect(),
                holes: holes.iter().map(|h| h.iter().map(m).collect()).collect(),
            },
            Shape::Disk { center, radius } => Shape::Disk { center: m(center), radius: lambda * radius },
            Shape::Annulus { center, r_inner, r_outer } => {
                Shape::Annulus { center: m(center), r_inner: lambda * r_inner, r_outer: lambda * r_outer }
            }
            Shape::Ellipse { center, a, b, angle } => {
                Shape::Ellipse { center: m(center), a: lambda * a, b: lambda * b, angle: *angle }
            }
            Shape::Raster(r) => {
                let mut r = r.clone();
                r.grid.origin = m(&r.grid.origin);
                r.grid.h *= lambda;
                Shape::Raster(r)
            }
        }
    }

    /// Number of holes.
    pub fn hole_count(&self) -> usize {
        match self {
            Shape::Polygon { holes, .. } => holes.len(),
            Shape::Annulus { .. } => 1,
            Shape::Disk { .. } | Shape::Ellipse { .. } => 0,
            Shape::Raster(r) => r.boundary_loops().iter().filter(|l| l.is_hole).count(),
        }
    }
}

impl Patch {
    /// Single-component patch.
    pub fn single(s: Shape) -> Self {
        Patch { components: vec![s] }
    }

    /// Validates every component and normalizes polygon orientations.
    pub fn normalized(&self) -> Result<Self> {
        if self.components.is_empty() {
            return Err(Error::DegenerateGeometry("patch without components".into()));
        }
        Ok(Patch { components: self.components.iter().map(|c| c.normalized()).collect::<Result<_>>()? })
    }

    /// Point membership.
    pub fn contains(&self, p: Point) -> bool {
        self.components.iter().any(|c| c.contains(p))
    }

    /// Bounding box of all components.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.components.iter().map(|c| c.bbox()).fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3)),
        )
    }

    /// Boundary curves of all components.
    pub fn boundary(&self, n: usize) -> Vec<BoundaryComponent> {
        self.components.iter().flat_map(|c| c.boundary(n)).collect()
    }

    /// Distance from `p` to the boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.components.iter().map(|c| c.boundary_distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Rigid motion of every component.
    pub fn transformed(&self, theta: f64, t: Point) -> Patch {
        Patch { components: self.components.iter().map(|c| c.transformed(theta, t)).collect() }
    }

    /// Dilation of every component.
    pub fn scaled(&self, lambda: f64) -> Patch {
        Patch { components: self.components.iter().map(|c| c.scaled(lambda)).collect() }
    }

    /// Rasterizes the patch on `grid` by the cell-centre rule.
    pub fn rasterize(&self, grid: Grid) -> Raster {
        Raster::from_fn(grid, |p| self.contains(p))
    }

    /// Reads a patch from its JSON file format.
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Patch = serde_json::from_str(text).map_err(|e| Error::Format(format!("patch file: {e}")))?;
        p.normalized()
    }

    /// Writes the JSON file format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}

/// Bounding box of a vertex loop.
pub fn loop_bbox(pts: &[Point]) -> (f64, f64, f64, f64) {
    pts.iter().fold((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p[0]), a.1.min(p[1]), a.2.max(p[0]), a.3.max(p[1]))
    })
}

/// Perimeter of a closed vertex loop.
pub fn loop_perimeter(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| (pts[(i + 1) % n][0] - pts[i][0]).hypot(pts[(i + 1) % n][1] - pts[i][1])).sum()
}

/// Distance from `p` to a closed vertex loop.
pub fn loop_distance(p: Point, pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| point_segment_distance(p, pts[i], pts[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

fn ellipse_distance(s: &Shape, p: Point) -> f64 {
    let Shape::Ellipse { center, a, b, angle } = s else { unreachable!() };
    let (sn, cs) = angle.sin_cos();
    let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
    let (u, v) = ((cs * dx + sn * dy).abs(), (-sn * dx + cs * dy).abs());
    // Minimize |(a cos t, b sin t) − (u, v)|² over t ∈ [0, π/2]: coarse scan
    // then Newton refinement.
    let f = |t: f64| (a * t.cos() - u).powi(2) + (b * t.sin() - v).powi(2);
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=64 {
        let t = std::f64::consts::FRAC_PI_2 * k as f64 / 64.0;
        let val = f(t);
        if val < best.0 {
            best = (val, t);
        }
    }
    let mut t = best.1;
    for _ in 0..30 {
        let (st, ct) = t.sin_cos();
        let g = -(a * ct - u) * a * st + (b * st - v) * b * ct;
        let h = (a * st).powi(2) - (a * ct - u) * a * ct + (b * ct).powi(2) - (b * st - v) * b * st;
        if h <= 0.0 {
            break;
        }
        let nt = (t - g / h).clamp(0.0, std::f64::consts::FRAC_PI_2);
        if (nt - t).abs() < 1e-15 {
            t = nt;
            break;
        }
        t = nt;
    }
    f(t).min(best.0).sqrt()
}

/// Seeded star-shaped polygon with `n` vertices (ChaCha8 generator):
/// `r(θ) = 1 + Σ_{k=2}^{5} (c_k cos kθ + s_k sin kθ)` with coefficients
/// uniform in `[−0.1, 0.1]`, so `r ∈ [0.2, 1.8]`, about a centre uniform in
/// `[−0.2, 0.2]²`.
pub fn random_star_polygon(seed: u64, n: usize) -> Patch {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<(f64, f64)> = (2..=5).map(|_| (rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1))).collect();
    let c = [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)];
    let outer = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let r = 1.0 + coef.iter().enumerate().map(|(j, (a, b))| a * ((j + 2) as f64 * t).cos() + b * ((j + 2) as f64 * t).sin()).sum::<f64>();
            [c[0] + r * t.cos(), c[1] + r * t.sin()]
        })
        .collect();
    Patch::single(Shape::Polygon { outer, holes: vec![] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patch_json_roundtrip() {
        let p = Patch::single(Shape::Ellipse { center: [0.5, 0.0], a: 2.0, b: 1.0, angle: 0.3 });
        let q = Patch::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
        let text = r#"{"type":"polygon","outer":[[0,0],[0,1],[1,1],[1,0]],"holes":[]}"#;
        let sq = Patch::from_json(text).unwrap();
        let Shape::Polygon { outer, .. } = &sq.components[0] else { panic!() };
        assert!(signed_area(outer) > 0.0, "outer loop re-oriented counter-clockwise");
        assert!(Patch::from_json(r#"{"type":"disk","center":[0,0],"radius":-1}"#).is_err());
        let multi = r#"{"components":[{"type":"disk","center":[0,0],"radius":1},{"type":"disk","center":[5,0],"radius":1}]}"#;
        assert_eq!(Patch::from_json(multi).unwrap().components.len(), 2);
    }

    #[test]
    fn invalid_polygons_are_rejected() {
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(Shape::polygon(bow, vec![]).is_err());
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let out_hole = vec![[2.0, 2.0], [3.0, 2.0], [3.0, 3.0]];
        assert!(Shape::polygon(sq.clone(), vec![out_hole]).is_err());
        let flat = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(Shape::polygon(flat, vec![]), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn ellipse_distance_matches_dense_polygon() {
        let e = Shape::Ellipse { center: [0.1, -0.2], a: 2.0, b: 0.7, angle: 0.4 };
        let dense = e.loops(20000);
        for p in [[0.0, 0.0], [3.0, 1.0], [0.5, 0.3], [-1.0, -2.0]] {
            let d = e.boundary_distance(p);
            let d2 = loop_distance(p, &dense[0].pts);
            assert!((d - d2).abs() < 1e-6, "{p:?}: {d} vs {d2}");
        }
    }
}
