//! Conforming triangulations of polygonal domains.
//!
//! General domains are meshed by a constrained Delaunay triangulation of the
//! boundary loops, seeded with quadtree cell centres that follow a size
//! function and then refined for a minimum angle.  Domains bounded by two
//! nested circles get a structured mapped mesh instead, which resolves thin
//! gaps with a fixed number of layers regardless of the gap width.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::io::Write;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{loop_distance, loop_perimeter, point_in_loop, polygon_area, refine_loop, Point, Shape};

/// Boundary tag of an interior node.
pub const INTERIOR: i32 = -1;
/// Boundary tag of nodes on the outer boundary.
pub const OUTER: i32 = 0;

/// A triangulated domain with boundary tags.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Node coordinates.
    pub points: Vec<Point>,
    /// Counter-clockwise triangles.
    pub triangles: Vec<[usize; 3]>,
    /// Per-node tag: [`INTERIOR`], [`OUTER`], or `k ≥ 1` for hole `k`.
    pub tags: Vec<i32>,
    /// Number of holes.
    pub holes: usize,
    /// Areas enclosed by the hole loops, as meshed.
    pub hole_areas: Vec<f64>,
    /// Target edge length the mesh was built for.
    pub edge_target: f64,
}

/// Sizing for [`Mesh::from_loops`].
#[derive(Debug, Clone, Copy)]
pub struct MeshOptions {
    /// Edge length on the boundary.
    pub boundary_h: f64,
    /// Growth of the element size with the distance to the boundary
    /// (`0` gives a uniform mesh).
    pub grading: f64,
    /// Largest edge length anywhere.
    pub max_h: f64,
}

impl MeshOptions {
    /// Uniform mesh with edge length `h`.
    pub fn uniform(h: f64) -> Self {
        Self { boundary_h: h, grading: 0.0, max_h: h }
    }
}

fn tri_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// An analytic boundary curve onto which boundary nodes can be projected
/// (circles are ellipses with `a = b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactCurve {
    /// Center.
    pub center: Point,
    /// First semiaxis.
    pub a: f64,
    /// Second semiaxis.
    pub b: f64,
    /// Rotation of the first axis.
    pub angle: f64,
}

impl ExactCurve {
    /// Circle of radius `r` about `c`.
    pub fn circle(c: Point, r: f64) -> Self {
        Self { center: c, a: r, b: r, angle: 0.0 }
    }

    /// Radial projection (in the ellipse's own normalized coordinates).
    pub fn project(&self, p: Point) -> Point {
        let (sa, ca) = self.angle.sin_cos();
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let u = [ca * d[0] + sa * d[1], -sa * d[0] + ca * d[1]];
        let s = 1.0 / ((u[0] / self.a).powi(2) + (u[1] / self.b).powi(2)).sqrt();
        let v = [s * u[0], s * u[1]];
        [self.center[0] + ca * v[0] - sa * v[1], self.center[1] + sa * v[0] + ca * v[1]]
    }

    /// The analytic curves of a shape, aligned with [`Shape::loops`].
    pub fn of_shape(shape: &Shape) -> Vec<Option<ExactCurve>> {
        match shape {
            Shape::Disk { center, radius } => vec![Some(Self::circle(*center, *radius))],
            Shape::Annulus { center, r_inner, r_outer } => {
                vec![Some(Self::circle(*center, *r_outer)), Some(Self::circle(*center, *r_inner))]
            }
            Shape::Ellipse { center, a, b, angle } => vec![Some(Self { center: *center, a: *a, b: *b, angle: *angle })],
            _ => shape.loops(0).iter().map(|_| None).collect(),
        }
    }
}

impl Mesh {
    /// Meshes the region bounded by `outer` (any orientation) minus the
    /// `holes`.  Boundary loops are split to edges of length
    /// `opts.boundary_h`.
    pub fn from_loops(outer: &[Point], holes: &[Vec<Point>], opts: MeshOptions) -> Result<Self> {
        let loop_h = vec![opts.boundary_h; 1 + holes.len()];
        Self::from_loops_graded(outer, holes, &loop_h, opts.grading, opts.max_h)
    }

    /// Like [`Mesh::from_loops`] with a separate boundary spacing per loop
    /// (`loop_h[0]` for the outer loop); the target size at a point is
    /// `min_k (loop_h[k] + grading·dist_k)`, capped at `max_h`.
    pub fn from_loops_graded(
        outer: &[Point],
        holes: &[Vec<Point>],
        loop_h: &[f64],
        grading: f64,
        max_h: f64,
    ) -> Result<Self> {
        if loop_h.len() != 1 + holes.len() || loop_h.iter().any(|h| !(*h > 0.0 && *h <= max_h)) {
            return Err(Error::Discretization(format!("invalid mesh sizes {loop_h:?} (max {max_h})")));
        }
        let opts = MeshOptions { boundary_h: loop_h.iter().copied().fold(f64::INFINITY, f64::min), grading, max_h };
        let mut loops: Vec<Vec<Point>> = Vec::with_capacity(1 + holes.len());
        loops.push(refine_loop(outer, loop_h[0]));
        for (h, &lh) in holes.iter().zip(&loop_h[1..]) {
            loops.push(refine_loop(h, lh));
        }
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for l in &loops {
            let base = vertices.len();
            for (k, p) in l.iter().enumerate() {
                vertices.push(Point2::new(p[0], p[1]));
                edges.push([base + k, base + (k + 1) % l.len()]);
            }
        }
        let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges)
            .map_err(|e| Error::Discretization(format!("boundary triangulation failed: {e:?}")))?;

        let inside = |p: Point| point_in_loop(p, &loops[0]) && !loops[1..].iter().any(|h| point_in_loop(p, h));
        let bdist = |p: Point| loops.iter().map(|l| loop_distance(p, l)).fold(f64::INFINITY, f64::min);
        // Target size at `p`, and its smallest value over a disk of radius `s` around it.
        let size_near = |p: Point, s: f64| {
            loops
                .iter()
                .zip(loop_h)
                .map(|(l, h)| h + grading * (loop_distance(p, l) - s).max(0.0))
                .fold(max_h, f64::min)
        };

        // Quadtree seeding: split cells larger than the local size.
        let (x0, y0, x1, y1) = crate::geometry::loop_bbox(&loops[0]);
        let side = (x1 - x0).max(y1 - y0);
        let mut stack = vec![([x0 + 0.5 * side, y0 + 0.5 * side], side)];
        let mut seeds = Vec::new();
        while let Some((c, s)) = stack.pop() {
            let d = bdist(c);
            // A cell entirely outside the domain and away from the boundary
            // can be dropped.
            if d > s && !inside(c) {
                continue;
            }
            if s > size_near(c, s) * 1.0001 {
                let q = 0.25 * s;
                for (dx, dy) in [(-q, -q), (q, -q), (-q, q), (q, q)] {
                    stack.push(([c[0] + dx, c[1] + dy], 0.5 * s));
                }
            } else if inside(c) && d > 0.6 * s {
                seeds.push(c);
            }
        }
        seeds.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        for p in seeds {
            cdt.insert(Point2::new(p[0], p[1]))
                .map_err(|e| Error::Discretization(format!("seed insertion failed: {e:?}")))?;
        }
        let params = RefinementParameters::<f64>::new()
            .exclude_outer_faces(true)
            .with_angle_limit(AngleLimit::from_deg(25.0))
            .with_max_allowed_area(0.5 * opts.max_h * opts.max_h)
            .with_max_additional_vertices(50 * cdt.num_vertices() + 10_000);
        let res = cdt.refine(params);
        if !res.refinement_complete {
            return Err(Error::Discretization("mesh refinement did not complete".into()));
        }
        let excluded: HashSet<_> = res.excluded_faces.into_iter().collect();

        let mut map = vec![usize::MAX; cdt.num_vertices()];
        let mut points = Vec::new();
        let mut triangles = Vec::new();
        for f in cdt.inner_faces() {
            if excluded.contains(&f.fix()) {
                continue;
            }
            let vs = f.vertices();
            let mut t = [0usize; 3];
            for (k, v) in vs.iter().enumerate() {
                let i = v.fix().index();
                if map[i] == usize::MAX {
                    map[i] = points.len();
                    let p = v.position();
                    points.push([p.x, p.y]);
                }
                t[k] = map[i];
            }
            if tri_area(points[t[0]], points[t[1]], points[t[2]]) < 0.0 {
                t.swap(1, 2);
            }
            triangles.push(t);
        }
        let mut tags = vec![INTERIOR; points.len()];
        for e in cdt.undirected_edges() {
            if !e.is_constraint_edge() {
                continue;
            }
            for v in e.vertices() {
                let i = map[v.fix().index()];
                if i == usize::MAX {
                    continue;
                }
                let p = points[i];
                let (mut best, mut tag) = (f64::INFINITY, OUTER);
                for (k, l) in loops.iter().enumerate() {
                    let d = loop_distance(p, l);
                    if d < best {
                        best = d;
                        tag = k as i32;
                    }
                }
                tags[i] = tag;
            }
        }
        let hole_areas = loops[1..].iter().map(|h| polygon_area(h).abs()).collect();
        let mesh = Mesh { points, triangles, tags, holes: holes.len(), hole_areas, edge_target: opts.boundary_h };
        mesh.check()?;
        Ok(mesh)
    }

    /// Moves the nodes of boundary component `tag` onto `curve` (the
    /// refinement inserts boundary nodes on chords) and updates the hole
    /// areas.
    pub fn snap_boundary(&mut self, tag: i32, curve: &ExactCurve) -> Result<()> {
        for i in 0..self.points.len() {
            if self.tags[i] == tag {
                self.points[i] = curve.project(self.points[i]);
            }
        }
        self.update_hole_areas();
        self.check()
    }

    /// Recomputes `hole_areas` from the boundary edges.
    fn update_hole_areas(&mut self) {
        let mut areas = vec![0.0; self.holes];
        for (i, j, t) in self.boundary_edges() {
            if t >= 1 {
                let (p, q) = (self.points[i], self.points[j]);
                // The hole lies to the right of the edge.
                areas[(t - 1) as usize] -= 0.5 * (p[0] * q[1] - q[0] * p[1]);
            }
        }
        self.hole_areas = areas;
    }

    /// Structured mesh of `B(c_out, r_out) ∖ B(c_in, r_in)` (the inner disk
    /// must lie strictly inside the outer one): `n_theta` rays from `c_in`,
    /// `layers` nodes-intervals along each ray between the two circles.
    pub fn two_circles(c_in: Point, r_in: f64, c_out: Point, r_out: f64, n_theta: usize, layers: usize) -> Result<Self> {
        let d = [c_in[0] - c_out[0], c_in[1] - c_out[1]];
        if !(r_in > 0.0) || d[0].hypot(d[1]) + r_in >= r_out {
            return Err(Error::Domain("inner disk must lie strictly inside the outer disk".into()));
        }
        if n_theta < 16 || layers < 1 {
            return Err(Error::Discretization("two-circle mesh needs n_theta ≥ 16 and layers ≥ 1".into()));
        }
        let m = layers;
        let mut points = Vec::with_capacity(n_theta * (m + 1));
        let mut tags = Vec::with_capacity(n_theta * (m + 1));
        let mut min_gap = f64::INFINITY;
        for k in 0..n_theta {
            let t = 2.0 * PI * k as f64 / n_theta as f64;
            let e = [t.cos(), t.sin()];
            let de = d[0] * e[0] + d[1] * e[1];
            let s = -de + (de * de - (d[0] * d[0] + d[1] * d[1]) + r_out * r_out).sqrt();
            min_gap = min_gap.min(s - r_in);
            for j in 0..=m {
                let rr = r_in + (s - r_in) * j as f64 / m as f64;
                points.push([c_in[0] + rr * e[0], c_in[1] + rr * e[1]]);
                tags.push(if j == 0 {
                    1
                } else if j == m {
                    OUTER
                } else {
                    INTERIOR
                });
            }
        }
        let id = |k: usize, j: usize| (k % n_theta) * (m + 1) + j;
        let mut triangles = Vec::with_capacity(2 * n_theta * m);
        for k in 0..n_theta {
            for j in 0..m {
                let (a, b, c, dd) = (id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j));
                // Alternate diagonals to avoid a directional bias.
                let pair = if (k + j) % 2 == 0 { [[a, dd, c], [a, c, b]] } else { [[a, dd, b], [dd, c, b]] };
                for mut t in pair {
                    if tri_area(points[t[0]], points[t[1]], points[t[2]]) < 0.0 {
                        t.swap(1, 2);
                    }
                    triangles.push(t);
                }
            }
        }
        let inner: Vec<Point> = (0..n_theta).map(|k| points[id(k, 0)]).collect();
        let outer_len = loop_perimeter(&(0..n_theta).map(|k| points[id(k, m)]).collect::<Vec<_>>());
        let mesh = Mesh {
            points,
            triangles,
            tags,
            holes: 1,
            hole_areas: vec![polygon_area(&inner).abs()],
            edge_target: (outer_len / n_theta as f64).min(min_gap / m as f64),
        };
        mesh.check()?;
        Ok(mesh)
    }

    fn check(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::Discretization("empty mesh".into()));
        }
        for t in &self.triangles {
            if !(self.area_of(t) > 0.0) {
                return Err(Error::Discretization("degenerate triangle in mesh".into()));
            }
        }
        for k in 0..=self.holes as i32 {
            if !self.tags.contains(&k) {
                return Err(Error::Discretization(format!("boundary component {k} has no nodes")));
            }
        }
        Ok(())
    }

    /// Area of a triangle.
    #[inline]
    pub fn area_of(&self, t: &[usize; 3]) -> f64 {
        tri_area(self.points[t[0]], self.points[t[1]], self.points[t[2]])
    }

    /// Total meshed area.
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.area_of(t)).sum()
    }

    /// Centroid of a triangle.
    pub fn centroid(&self, t: &[usize; 3]) -> Point {
        let [a, b, c] = t.map(|i| self.points[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Gradients of the three hat functions of a triangle (constant on it).
    pub fn hat_gradients(&self, t: &[usize; 3]) -> [[f64; 2]; 3] {
        let [a, b, c] = t.map(|i| self.points[i]);
        let two_a = 2.0 * tri_area(a, b, c);
        [
            [(b[1] - c[1]) / two_a, (c[0] - b[0]) / two_a],
            [(c[1] - a[1]) / two_a, (a[0] - c[0]) / two_a],
            [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a],
        ]
    }

    /// Gradient of a nodal (P1) field on a triangle.
    pub fn gradient(&self, t: &[usize; 3], values: &[f64]) -> [f64; 2] {
        let g = self.hat_gradients(t);
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += values[t[k]] * g[k][0];
            out[1] += values[t[k]] * g[k][1];
        }
        out
    }

    /// Longest edge.
    pub fn max_edge(&self) -> f64 {
        let mut m: f64 = 0.0;
        for t in &self.triangles {
            for k in 0..3 {
                let (p, q) = (self.points[t[k]], self.points[t[(k + 1) % 3]]);
                m = m.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        m
    }

    /// Nodes carrying tag `tag`.
    pub fn nodes_with_tag(&self, tag: i32) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.tags[i] == tag).collect()
    }

    /// Boundary edges `(i, j, tag)` (edges with only one adjacent triangle),
    /// oriented with the domain on the left.
    pub fn boundary_edges(&self) -> Vec<(usize, usize, i32)> {
        use std::collections::HashMap;
        let mut count: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (i, j) = (t[k], t[(k + 1) % 3]);
                let key = (i.min(j), i.max(j));
                let e = count.entry(key).or_insert((0, 0));
                e.0 += 1;
                e.1 = if i < j { 0 } else { 1 };
            }
        }
        let mut out: Vec<_> = count
            .into_iter()
            .filter(|(_, (c, _))| *c == 1)
            .map(|((a, b), (_, dir))| {
                let (i, j) = if dir == 0 { (a, b) } else { (b, a) };
                (i, j, self.tags[i].max(self.tags[j]))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Writes `vertices n` / `x y` lines, `triangles m` / `i j k` lines and,
    /// when given, `values n` / one value per line.
    pub fn write_text(&self, mut w: impl Write, values: Option<&[f64]>) -> Result<()> {
        writeln!(w, "vertices {}", self.points.len())?;
        for (p, t) in self.points.iter().zip(&self.tags) {
            writeln!(w, "{:.17e} {:.17e} {}", p[0], p[1], t)?;
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        if let Some(v) = values {
            writeln!(w, "values {}", v.len())?;
            for x in v {
                writeln!(w, "{x:.17e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(r: f64, n: usize) -> Vec<Point> {
        (0..n).map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        }).collect()
    }

    #[test]
    fn square_with_hole_mesh_is_conforming() {
        let outer = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let hole: Vec<Point> = circle(0.2, 64).iter().map(|p| [p[0] + 0.5, p[1] + 0.5]).collect();
        let m = Mesh::from_loops(&outer, &[hole.clone()], MeshOptions::uniform(0.05)).unwrap();
        let expect = 1.0 - polygon_area(&hole).abs();
        assert!((m.area() - expect).abs() < 1e-12, "{} {expect}", m.area());
        assert!(m.max_edge() < 0.1);
        assert_eq!(m.holes, 1);
        // Every boundary edge carries a boundary tag at both ends.
        for (i, j, _) in m.boundary_edges() {
            assert!(m.tags[i] != INTERIOR && m.tags[j] != INTERIOR);
        }
    }

    #[test]
    fn graded_mesh_is_coarser_inside() {
        let m_u = Mesh::from_loops(&circle(1.0, 128), &[], MeshOptions::uniform(0.05)).unwrap();
        let m_g = Mesh::from_loops(&circle(1.0, 128), &[], MeshOptions { boundary_h: 0.05, grading: 0.5, max_h: 0.3 }).unwrap();
        assert!(m_g.triangles.len() * 2 < m_u.triangles.len());
        assert!((m_g.area() - m_u.area()).abs() < 1e-9);
    }

    #[test]
    fn two_circle_mesh_covers_the_eccentric_annulus() {
        let m = Mesh::two_circles([0.0, 0.0], 1.0, [0.3, 0.0], 1.5, 512, 12).unwrap();
        let exact = PI * (1.5f64.powi(2) - 1.0);
        assert!((m.area() - exact).abs() < 1e-3 * exact);
        assert_eq!(m.nodes_with_tag(1).len(), 512);
    }
}
