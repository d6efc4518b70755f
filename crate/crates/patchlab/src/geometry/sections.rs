//! One-dimensional sections of patches along a direction, and the
//! symmetric-difference area built on them.

use serde::{Deserialize, Serialize};

use super::{Patch, Point, Shape};
use crate::quad::adaptive_gk;
use crate::error::{Error, Result};

/// Finite disjoint union of open intervals, sorted, with positive gaps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalSet {
    ivs: Vec<(f64, f64)>,
}

impl IntervalSet {
    /// Validates a sorted list of disjoint open intervals.
    pub fn new(ivs: Vec<(f64, f64)>) -> Result<Self> {
        for (k, &(l, r)) in ivs.iter().enumerate() {
            if !(l < r) {
                return Err(Error::Domain(format!("interval {k} = ({l}, {r}) is empty")));
            }
            if k > 0 && !(ivs[k - 1].1 < l) {
                return Err(Error::Domain(format!("intervals {} and {k} overlap or touch", k - 1)));
            }
        }
        Ok(Self { ivs })
    }

    /// Union of arbitrary intervals (empty ones dropped, touching ones merged).
    pub fn from_unsorted(mut ivs: Vec<(f64, f64)>) -> Self {
        ivs.retain(|&(l, r)| l < r);
        ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
        for (l, r) in ivs {
            match out.last_mut() {
                Some(last) if l <= last.1 => last.1 = last.1.max(r),
                _ => out.push((l, r)),
            }
        }
        Self { ivs: out }
    }

    /// Empty set.
    pub fn empty() -> Self {
        Self::default()
    }

    /// The intervals in increasing order.
    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.ivs
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.ivs.len()
    }

    /// True when the set is empty.
    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    /// Lebesgue measure.
    pub fn total_length(&self) -> f64 {
        self.ivs.iter().map(|(l, r)| r - l).sum()
    }

    /// Membership of a point.
    pub fn contains(&self, x: f64) -> bool {
        self.ivs.iter().any(|&(l, r)| l < x && x < r)
    }

    /// Union with another set.
    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut v = self.ivs.clone();
        v.extend_from_slice(&other.ivs);
        Self::from_unsorted(v)
    }

    /// Measure of the intersection.
    pub fn intersection_length(&self, other: &IntervalSet) -> f64 {
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < self.ivs.len() && j < other.ivs.len() {
            let (a, b) = (self.ivs[i], other.ivs[j]);
            let lo = a.0.max(b.0);
            let hi = a.1.min(b.1);
            if hi > lo {
                s += hi - lo;
            }
            if a.1 < b.1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        s
    }

    /// Measure of the symmetric difference.
    pub fn symmetric_difference_length(&self, other: &IntervalSet) -> f64 {
        self.total_length() + other.total_length() - 2.0 * self.intersection_length(other)
    }

    /// Boundary points (interval endpoints).
    pub fn endpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.ivs.iter().flat_map(|&(l, r)| [l, r])
    }
}

/// The section of a patch along one line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    /// Transverse coordinate `x'` of the line.
    pub coord: f64,
    /// The 1D open set `{x₁ : (x₁, x') ∈ D}`.
    pub set: IntervalSet,
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Section of one shape along direction `d` (unit) on the line at
/// transverse coordinate `xp` (measured along `d⊥ = (−d_y, d_x)`).
pub fn shape_section(s: &Shape, d: Point, xp: f64) -> Result<IntervalSet> {
    let n = [-d[1], d[0]];
    let circle = |c: Point, r: f64| -> Option<(f64, f64)> {
        let (cu, cv) = (dot(c, d), dot(c, n));
        let dv = xp - cv;
        (dv.abs() < r).then(|| {
            let w = (r * r - dv * dv).sqrt();
            (cu - w, cu + w)
        })
    };
    Ok(match s {
        Shape::Polygon { outer, holes } => {
            let mut ts = Vec::new();
            for lp in std::iter::once(outer).chain(holes.iter()) {
                let m = lp.len();
                for i in 0..m {
                    let (p, q) = (lp[i], lp[(i + 1) % m]);
                    let (sp, sq) = (dot(p, n), dot(q, n));
                    if (sp > xp) != (sq > xp) {
                        let t = (xp - sp) / (sq - sp);
                        ts.push(dot(p, d) + t * (dot(q, d) - dot(p, d)));
                    }
                }
            }
            ts.sort_by(f64::total_cmp);
            IntervalSet::from_unsorted(ts.chunks_exact(2).map(|c| (c[0], c[1])).collect())
        }
        Shape::Disk { center, radius } => IntervalSet::from_unsorted(circle(*center, *radius).into_iter().collect()),
        Shape::Annulus { center, r_inner, r_outer } => match (circle(*center, *r_outer), circle(*center, *r_inner)) {
            (Some(o), Some(i)) => IntervalSet::from_unsorted(vec![(o.0, i.0), (i.1, o.1)]),
            (Some(o), None) => IntervalSet::from_unsorted(vec![o]),
            _ => IntervalSet::empty(),
        },
        Shape::Ellipse { center, a, b, angle } => {
            // Point on the line: t·d + xp·n − c, in the ellipse frame.
            let (sn, cs) = angle.sin_cos();
            let (e1, e2) = ([cs, sn], [-sn, cs]);
            let p0 = [xp * n[0] - center[0], xp * n[1] - center[1]];
            let (u0, u1) = (dot(p0, e1) / a, dot(d, e1) / a);
            let (v0, v1) = (dot(p0, e2) / b, dot(d, e2) / b);
            let qa = u1 * u1 + v1 * v1;
            let qb = 2.0 * (u0 * u1 + v0 * v1);
            let qc = u0 * u0 + v0 * v0 - 1.0;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc > 0.0 {
                let sq = disc.sqrt();
                IntervalSet::from_unsorted(vec![((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa))])
            } else {
                IntervalSet::empty()
            }
        }
        Shape::Raster(r) => {
            let g = &r.grid;
            let (horizontal, sign) = if d[0] > 1.0 - 1e-12 {
                (true, 1.0)
            } else if d[0] < -1.0 + 1e-12 {
                (true, -1.0)
            } else if d[1] > 1.0 - 1e-12 {
                (false, 1.0)
            } else if d[1] < -1.0 + 1e-12 {
                (false, -1.0)
            } else {
                return Err(Error::Domain("raster sections are available along ±e₁, ±e₂ only".into()));
            };
            // Transverse coordinate: along n = (−d_y, d_x).
            let mut ivs = Vec::new();
            if horizontal {
                // n = (0, sign): row at y = sign·xp.
                let y = sign * xp;
                let j = ((y - g.origin[1]) / g.h).floor();
                if j >= 0.0 && (j as usize) < g.ny {
                    let j = j as usize;
                    let mut i = 0;
                    while i < g.nx {
                        if r.get(i, j) {
                            let s0 = i;
                            while i < g.nx && r.get(i, j) {
                                i += 1;
                            }
                            let (l, rr) = (g.origin[0] + s0 as f64 * g.h, g.origin[0] + i as f64 * g.h);
                            ivs.push(if sign > 0.0 { (l, rr) } else { (-rr, -l) });
                        } else {
                            i += 1;
                        }
                    }
                }
            } else {
                // d = (0, sign), n = (−sign, 0): column at x = −sign·xp.
                let x = -sign * xp;
                let i = ((x - g.origin[0]) / g.h).floor();
                if i >= 0.0 && (i as usize) < g.nx {
                    let i = i as usize;
                    let mut j = 0;
                    while j < g.ny {
                        if r.get(i, j) {
                            let s0 = j;
                            while j < g.ny && r.get(i, j) {
                                j += 1;
                            }
                            let (l, rr) = (g.origin[1] + s0 as f64 * g.h, g.origin[1] + j as f64 * g.h);
                            ivs.push(if sign > 0.0 { (l, rr) } else { (-rr, -l) });
                        } else {
                            j += 1;
                        }
                    }
                }
            }
            IntervalSet::from_unsorted(ivs)
        }
    })
}

/// Section of a patch (union over components).
pub fn patch_section(p: &Patch, d: Point, xp: f64) -> Result<IntervalSet> {
    let mut acc = IntervalSet::empty();
    for s in &p.components {
        acc = acc.union(&shape_section(s, d, xp)?);
    }
    Ok(acc)
}

fn transverse_range(p: &Patch, n: Point) -> (f64, f64) {
    let (x0, y0, x1, y1) = p.bbox();
    [[x0, y0], [x1, y0], [x0, y1], [x1, y1]]
        .iter()
        .map(|c| dot(*c, n))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(v), a.1.max(v)))
}

/// Sections of `patch` along the unit vector `direction` on the lines
/// `x' = (k + ½)·h` covering the patch.  Raster components sectioned along
/// an axis use their own rows when `h` matches the raster spacing.
pub fn sections(patch: &Patch, direction: Point, h: f64) -> Result<Vec<Section>> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("line spacing {h}")));
    }
    let nrm = direction[0].hypot(direction[1]);
    let d = [direction[0] / nrm, direction[1] / nrm];
    let n = [-d[1], d[0]];
    let (lo, hi) = transverse_range(patch, n);
    let offset = patch
        .components
        .iter()
        .find_map(|s| match s {
            Shape::Raster(r) if (r.grid.h - h).abs() < 1e-12 * h => {
                Some(if d[0].abs() > 0.5 { r.grid.origin[1] * n[1] } else { r.grid.origin[0] * n[0] })
            }
            _ => None,
        })
        .unwrap_or(0.0);
    let k0 = ((lo - offset) / h).floor() as i64 - 1;
    let k1 = ((hi - offset) / h).ceil() as i64 + 1;
    (k0..=k1)
        .map(|k| {
            let xp = offset + (k as f64 + 0.5) * h;
            Ok(Section { coord: xp, set: patch_section(patch, d, xp)? })
        })
        .collect()
}

/// `|a △ b|` by integrating exact chord differences along `e₁` over the
/// transverse coordinate.
///
/// If either patch contains a raster, the lines are the raster rows
/// (midpoint rule at the finest raster spacing, which is exact for the
/// cell-centre rule).  Otherwise the chord-difference profile is
/// integrated adaptively between the vertical breakpoints of both patches
/// with `n_lines` setting the initial subdivision.
pub fn symmetric_difference_on(a: &Patch, b: &Patch, n_lines: usize) -> Result<f64> {
    let raster_h = a
        .components
        .iter()
        .chain(&b.components)
        .filter_map(|s| if let Shape::Raster(r) = s { Some((r.grid.h, r.grid.origin[1])) } else { None })
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            Some(x) if x.0 <= v.0 => Some(x),
            _ => Some(v),
        });
    let (_, y0, _, y1) = a.bbox();
    let (_, z0, _, z1) = b.bbox();
    let (ya0, ya1) = (y0.min(z0), y1.max(z1));
    if let Some((h, offset)) = raster_h {
        let k0 = ((ya0 - offset) / h).floor() as i64 - 1;
        let k1 = ((ya1 - offset) / h).ceil() as i64 + 1;
        let mut total = 0.0;
        for k in k0..=k1 {
            let y = offset + (k as f64 + 0.5) * h;
            let sa = patch_section(a, [1.0, 0.0], y)?;
            let sb = patch_section(b, [1.0, 0.0], y)?;
            total += sa.symmetric_difference_length(&sb) * h;
        }
        return Ok(total);
    }
    let mut breaks: Vec<f64> = Vec::new();
    for s in a.components.iter().chain(&b.components) {
        let (_, y0, _, y1) = s.bbox();
        breaks.extend([y0, y1]);
        match s {
            Shape::Polygon { outer, holes } => {
                breaks.extend(outer.iter().chain(holes.iter().flatten()).map(|p| p[1]));
            }
            Shape::Annulus { center, r_inner, .. } => breaks.extend([center[1] - r_inner, center[1] + r_inner]),
            _ => {}
        }
    }
    let n = n_lines.max(1);
    breaks.extend((0..=n).map(|k| ya0 + (ya1 - ya0) * k as f64 / n as f64));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-15 * (1.0 + y.abs()));
    let mut err: Option<Error> = None;
    let mut profile = |y: f64| match (patch_section(a, [1.0, 0.0], y), patch_section(b, [1.0, 0.0], y)) {
        (Ok(sa), Ok(sb)) => sa.symmetric_difference_length(&sb),
        (Err(e), _) | (_, Err(e)) => {
            err = Some(e);
            0.0
        }
    };
    let tol = 1e-12 * (ya1 - ya0).powi(2) / breaks.len() as f64;
    let total = breaks.windows(2).map(|w| adaptive_gk(&mut profile, w[0], w[1], tol, 30)).sum();
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// `|a △ b|` at the default resolution of 2048 lines.
pub fn symmetric_difference(a: &Patch, b: &Patch) -> Result<f64> {
    symmetric_difference_on(a, b, 2048)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{measures, Grid};
    use std::f64::consts::PI;

    #[test]
    fn interval_set_invariants() {
        assert!(IntervalSet::new(vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(IntervalSet::new(vec![(1.0, 0.0)]).is_err());
        let s = IntervalSet::from_unsorted(vec![(2.0, 3.0), (0.0, 1.0), (0.5, 1.5)]);
        assert_eq!(s.intervals(), &[(0.0, 1.5), (2.0, 3.0)]);
        assert!((s.total_length() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn disk_and_annulus_sections() {
        let disk = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
        let s0 = patch_section(&disk, [1.0, 0.0], 0.0).unwrap();
        assert_eq!(s0.intervals(), &[(-1.0, 1.0)]);
        let s6 = patch_section(&disk, [1.0, 0.0], 0.6).unwrap();
        assert!((s6.intervals()[0].0 + 0.8).abs() < 1e-15 && (s6.intervals()[0].1 - 0.8).abs() < 1e-15);
        let ann = Patch::single(Shape::Annulus { center: [0.0, 0.0], r_inner: 1.0, r_outer: 2.0 });
        let sa = patch_section(&ann, [1.0, 0.0], 0.0).unwrap();
        assert_eq!(sa.intervals(), &[(-2.0, -1.0), (1.0, 2.0)]);
        let poly = Patch::single(Shape::Annulus { center: [0.0, 0.0], r_inner: 1.0, r_outer: 2.0 }.to_polygon(4096));
        let sp = patch_section(&poly, [1.0, 0.0], 0.0).unwrap();
        assert_eq!(sp.len(), 2);
        assert!((sp.total_length() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ellipse_section_in_rotated_direction() {
        let e = Shape::Ellipse { center: [0.3, 0.1], a: 2.0, b: 1.0, angle: 0.7 };
        let poly = e.to_polygon(20000);
        let d = [0.6, 0.8];
        for xp in [-0.5, 0.0, 0.4] {
            let a = shape_section(&e, d, xp).unwrap().total_length();
            let b = shape_section(&poly, d, xp).unwrap().total_length();
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn fubini_for_sections() {
        let sq = Patch::single(Shape::polygon(vec![[0.0, 0.0], [2.0, 0.3], [1.5, 1.7], [0.2, 1.0]], vec![]).unwrap());
        let m = measures(&sq).unwrap();
        let h = 0.01;
        let total: f64 = sections(&sq, [1.0, 0.0], h).unwrap().iter().map(|s| s.set.total_length() * h).sum();
        assert!((total - m.area).abs() <= 2.0 * h * m.perimeter);
    }

    #[test]
    fn raster_sections_are_rows() {
        let g = Grid::covering((-1.0, -1.0, 1.0, 1.0), 64);
        let r = Patch::single(Shape::Raster(Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 0.9 }).rasterize(g)));
        let secs = sections(&r, [1.0, 0.0], g.h).unwrap();
        let total: f64 = secs.iter().map(|s| s.set.total_length() * g.h).sum();
        let Shape::Raster(rr) = &r.components[0] else { panic!() };
        assert!((total - rr.area()).abs() < 1e-12);
        let cols = sections(&r, [0.0, 1.0], g.h).unwrap();
        let total_c: f64 = cols.iter().map(|s| s.set.total_length() * g.h).sum();
        assert!((total_c - rr.area()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_difference_examples() {
        let d = |c: f64| Patch::single(Shape::Disk { center: [c, 0.0], radius: 1.0 });
        assert_eq!(symmetric_difference(&d(0.0), &d(0.0)).unwrap(), 0.0);
        assert!((symmetric_difference(&d(0.0), &d(3.0)).unwrap() - 2.0 * PI).abs() < 1e-5);
        let eps = 1e-3;
        let v = symmetric_difference_on(&d(0.0), &d(2.0 * eps), 20000).unwrap();
        // Exact lens complement: 2(π − lens), lens = 2 acos(ε) − 2ε√(1−ε²).
        let exact = 2.0 * (PI - (2.0 * eps.acos() - 2.0 * eps * (1.0 - eps * eps).sqrt()));
        assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
        assert!((v - 8.0 * eps).abs() < 1e-5);
    }
}
