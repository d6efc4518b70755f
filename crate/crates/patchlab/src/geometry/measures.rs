//! Area, perimeter, centroid, second moment and outer radius of a patch.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{loop_bbox, loop_perimeter, Patch, Point, Shape};
use crate::error::{Error, Result};

/// Basic measures of a patch; the second moment is `∫_D |x|² dx` about the
/// origin and `r_max = sup_{x∈D} |x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    /// `|D|`.
    pub area: f64,
    /// `|∂D|` (all boundary components).
    pub perimeter: f64,
    /// Centre of mass.
    pub centroid: Point,
    /// `∫_D |x|² dx`.
    pub second_moment: f64,
    /// `R = max_{x∈D̄} |x|`.
    pub r_max: f64,
}

/// Signed shoelace area of a loop.
pub fn polygon_area(pts: &[Point]) -> f64 {
    super::signed_area(pts)
}

/// Signed first moments `(∫x, ∫y)` of a loop.
pub fn polygon_centroid(pts: &[Point]) -> Point {
    let n = pts.len();
    let mut m = [0.0, 0.0];
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        let cr = p[0] * q[1] - q[0] * p[1];
        m[0] += (p[0] + q[0]) * cr / 6.0;
        m[1] += (p[1] + q[1]) * cr / 6.0;
    }
    m
}

/// Signed `∫ |x|² dx` over the region enclosed by a loop.
pub fn polygon_second_moment(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            let cr = p[0] * q[1] - q[0] * p[1];
            cr * (p[0] * p[0] + p[0] * q[0] + q[0] * q[0] + p[1] * p[1] + p[1] * q[1] + q[1] * q[1]) / 12.0
        })
        .sum()
}

fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    // Trapezoidal rule on a smooth periodic integrand converges spectrally.
    let n = 4096;
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            (a * t.sin()).hypot(b * t.cos())
        })
        .sum::<f64>()
        * 2.0
        * PI
        / n as f64
}

fn shape_measures(s: &Shape) -> Measures {
    let norm = |c: Point| c[0].hypot(c[1]);
    match s {
        Shape::Polygon { outer, holes } => {
            let mut area = polygon_area(outer);
            let mut c = polygon_centroid(outer);
            let mut m2 = polygon_second_moment(outer);
            let mut per = loop_perimeter(outer);
            for h in holes {
                area += polygon_area(h);
                let ch = polygon_centroid(h);
                c[0] += ch[0];
                c[1] += ch[1];
                m2 += polygon_second_moment(h);
                per += loop_perimeter(h);
            }
            let r_max = outer.iter().map(|p| norm(*p)).fold(0.0, f64::max);
            Measures { area, perimeter: per, centroid: [c[0] / area, c[1] / area], second_moment: m2, r_max }
        }
        Shape::Disk { center, radius: r } => {
            let area = PI * r * r;
            Measures {
                area,
                perimeter: 2.0 * PI * r,
                centroid: *center,
                second_moment: PI * r.powi(4) / 2.0 + area * norm(*center).powi(2),
                r_max: norm(*center) + r,
            }
        }
        Shape::Annulus { center, r_inner: a, r_outer: b } => {
            let area = PI * (b * b - a * a);
            Measures {
                area,
                perimeter: 2.0 * PI * (a + b),
                centroid: *center,
                second_moment: PI * (b.powi(4) - a.powi(4)) / 2.0 + area * norm(*center).powi(2),
                r_max: norm(*center) + b,
            }
        }
        Shape::Ellipse { center, a, b, .. } => {
            let area = PI * a * b;
            let dense = s.loops(8192);
            let r_max = dense[0].pts.iter().map(|p| norm(*p)).fold(0.0, f64::max);
            // Refine the farthest point by a local ternary search in the angle.
            let r_max = refine_ellipse_rmax(s, r_max);
            Measures {
                area,
                perimeter: ellipse_perimeter(*a, *b),
                centroid: *center,
                second_moment: area * (a * a + b * b) / 4.0 + area * norm(*center).powi(2),
                r_max,
            }
        }
        Shape::Raster(r) => {
            let g = &r.grid;
            let cell = g.h * g.h;
            let (mut n, mut cx, mut cy, mut m2, mut rm) = (0usize, 0.0, 0.0, 0.0, 0.0f64);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    if r.get(i, j) {
                        let c = g.center(i, j);
                        n += 1;
                        cx += c[0];
                        cy += c[1];
                        m2 += c[0] * c[0] + c[1] * c[1] + g.h * g.h / 6.0;
                        rm = rm.max((c[0].abs() + 0.5 * g.h).hypot(c[1].abs() + 0.5 * g.h));
                    }
                }
            }
            let nf = n.max(1) as f64;
            Measures {
                area: n as f64 * cell,
                perimeter: r.perimeter_estimate(),
                centroid: [cx / nf, cy / nf],
                second_moment: m2 * cell,
                r_max: rm,
            }
        }
    }
}

fn refine_ellipse_rmax(s: &Shape, guess: f64) -> f64 {
    let Shape::Ellipse { center, a, b, angle } = s else { return guess };
    let f = |t: f64| super::ellipse_point(*center, *a, *b, *angle, t);
    let n = 8192;
    let mut best = (0.0, 0.0);
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / n as f64;
        let p = f(t);
        let r = p[0].hypot(p[1]);
        if r > best.0 {
            best = (r, t);
        }
    }
    let (mut lo, mut hi) = (best.1 - 2.0 * PI / n as f64, best.1 + 2.0 * PI / n as f64);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let (p1, p2) = (f(m1), f(m2));
        if p1[0].hypot(p1[1]) < p2[0].hypot(p2[1]) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let p = f(0.5 * (lo + hi));
    p[0].hypot(p[1]).max(best.0)
}

/// Measures of a patch (components are assumed disjoint).
pub fn measures(patch: &Patch) -> Result<Measures> {
    let mut total = Measures { area: 0.0, perimeter: 0.0, centroid: [0.0, 0.0], second_moment: 0.0, r_max: 0.0 };
    for s in &patch.components {
        let m = shape_measures(s);
        let (x0, y0, x1, y1) = match s {
            Shape::Polygon { outer, .. } => loop_bbox(outer),
            _ => s.bbox(),
        };
        let scale = (x1 - x0).max(y1 - y0).powi(2);
        if !(m.area > 10.0 * f64::EPSILON * scale) {
            return Err(Error::DegenerateGeometry(format!("component area {} is degenerate", m.area)));
        }
        total.centroid[0] += m.centroid[0] * m.area;
        total.centroid[1] += m.centroid[1] * m.area;
        total.area += m.area;
        total.perimeter += m.perimeter;
        total.second_moment += m.second_moment;
        total.r_max = total.r_max.max(m.r_max);
    }
    total.centroid = [total.centroid[0] / total.area, total.centroid[1] / total.area];
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    #[test]
    fn analytic_measures() {
        let d = measures(&Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 })).unwrap();
        assert!((d.area - PI).abs() < 1e-14 && (d.second_moment - PI / 2.0).abs() < 1e-14);
        let e = measures(&Patch::single(Shape::Ellipse { center: [0.0, 0.0], a: 2.0, b: 1.0, angle: 0.0 })).unwrap();
        assert!((e.area - 2.0 * PI).abs() < 1e-14 && (e.second_moment - 2.5 * PI).abs() < 1e-13);
        assert!((e.r_max - 2.0).abs() < 1e-12);
        // Ramanujan's second approximation is accurate to ~1e-9 here.
        let hh = ((2.0f64 - 1.0) / 3.0).powi(2);
        let ram = PI * 3.0 * (1.0 + 3.0 * hh / (10.0 + (4.0 - 3.0 * hh).sqrt()));
        assert!((e.perimeter - ram).abs() < 1e-6);
        let a = measures(&Patch::single(Shape::Annulus { center: [0.0, 0.0], r_inner: 1.0, r_outer: 2.0 })).unwrap();
        assert!((a.area - 3.0 * PI).abs() < 1e-13 && (a.second_moment - 7.5 * PI).abs() < 1e-13);
    }

    #[test]
    fn polygon_measures_match_ellipse_oracle() {
        let e = Shape::Ellipse { center: [0.0, 0.0], a: 2.0, b: 1.0, angle: 0.0 };
        let m = measures(&Patch::single(e.to_polygon(4096))).unwrap();
        assert!((m.area - 2.0 * PI).abs() < 1e-5);
        assert!((m.second_moment - 2.5 * PI).abs() < 1e-4);
        let sq = measures(&Patch::single(Shape::rectangle(-1.0, -1.0, 1.0, 1.0))).unwrap();
        assert!((sq.area - 4.0).abs() < 1e-15 && (sq.second_moment - 8.0 / 3.0).abs() < 1e-14);
        assert!((sq.perimeter - 8.0).abs() < 1e-15);
    }

    #[test]
    fn raster_measures_converge_at_first_order() {
        let disk = Patch::single(Shape::Disk { center: [0.3, -0.2], radius: 1.0 });
        let exact = measures(&disk).unwrap();
        let mut errs = vec![];
        for n in [64, 128, 256] {
            let g = Grid::covering((-1.0, -1.5, 1.6, 1.1), n);
            let r = Patch::single(Shape::Raster(disk.rasterize(g)));
            let m = measures(&r).unwrap();
            let err = (m.area - exact.area).abs() + (m.second_moment - exact.second_moment).abs();
            assert!(err < 10.0 * g.h, "n = {n}: {err}");
            assert!((m.centroid[0] - 0.3).abs() < 2.0 * g.h);
            errs.push(err);
        }
    }

    #[test]
    fn degenerate_polygon_is_an_error() {
        let s = Shape::Polygon { outer: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 1e-18]], holes: vec![] };
        assert!(matches!(measures(&Patch::single(s)), Err(Error::DegenerateGeometry(_))));
    }
}
