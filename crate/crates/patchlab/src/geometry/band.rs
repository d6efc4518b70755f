//! The boundary band `B^τ[D] = {x : dist(x, ∂D) ≤ τ}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Grid, Patch, Point, Raster, Shape};
use crate::error::{Error, Result};
use crate::quad::adaptive_gk;

/// Raster picture of the band together with its area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandResult {
    /// Cells whose centre lies within `τ` of `∂D`.
    pub band_region: Raster,
    /// `|B^τ[D]|`.
    pub band_area: f64,
    /// True when `band_area` is exact up to quadrature round-off (analytic
    /// disk/annulus formula or exact polygon scan-line integration), false
    /// when it is a raster cell count.
    pub exact: bool,
}

/// Default raster resolution of the band picture.
pub const BAND_GRID: usize = 256;

/// Computes the band of width `tau` around `∂D`.
///
/// The area is exact for disks and annuli, obtained by scan-line
/// integration of exact chord lengths for polygons (ellipses are treated
/// through a 2048-node polygon), and by cell counting for rasters.  When
/// `tau` exceeds the bounding-box diagonal the band simply covers the
/// padded bounding box; this is not an error.
pub fn boundary_band(patch: &Patch, tau: f64) -> Result<BandResult> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("band width must be positive, got {tau}")));
    }
    let (x0, y0, x1, y1) = patch.bbox();
    let raster_grid = patch.components.iter().find_map(|s| match s {
        Shape::Raster(r) => Some(r.grid),
        _ => None,
    });
    let grid = match raster_grid {
        Some(g) => {
            let pad = (tau / g.h).ceil() as usize + 1;
            Grid {
                origin: [g.origin[0] - pad as f64 * g.h, g.origin[1] - pad as f64 * g.h],
                h: g.h,
                nx: g.nx + 2 * pad,
                ny: g.ny + 2 * pad,
            }
        }
        None => Grid::covering((x0 - tau, y0 - tau, x1 + tau, y1 + tau), BAND_GRID),
    };
    // Distances are measured to the polygonized boundary for speed, except
    // for analytic shapes that have exact distance formulas.
    let polys: Vec<Shape> = patch
        .components
        .iter()
        .map(|s| match s {
            Shape::Polygon { .. } | Shape::Raster(_) => s.to_polygon(2048),
            _ => s.clone(),
        })
        .collect();
    let dist = |p: Point| polys.iter().map(|s| s.boundary_distance(p)).fold(f64::INFINITY, f64::min);
    let band_region = Raster::from_fn(grid, |p| dist(p) <= tau);
    let (band_area, exact) = if raster_grid.is_some() {
        (band_region.area(), false)
    } else if let [Shape::Disk { radius, .. }] = patch.components.as_slice() {
        (radial_band_area(&[*radius], tau), true)
    } else if let [Shape::Annulus { r_inner, r_outer, .. }] = patch.components.as_slice() {
        (radial_band_area(&[*r_inner, *r_outer], tau), true)
    } else {
        let mut loops: Vec<Vec<Point>> = Vec::new();
        for s in &patch.components {
            loops.extend(s.loops(2048).into_iter().map(|l| l.pts));
        }
        (polygon_band_area(&loops, tau), true)
    };
    Ok(BandResult { band_region, band_area, exact })
}

fn radial_band_area(radii: &[f64], tau: f64) -> f64 {
    let mut ivs: Vec<(f64, f64)> = radii.iter().map(|&r| ((r - tau).max(0.0), r + tau)).collect();
    ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in ivs {
        match merged.last_mut() {
            Some(m) if a <= m.1 => m.1 = m.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged.iter().map(|(a, b)| PI * (b * b - a * a)).sum()
}

/// Horizontal section `[lo, hi]` of the stadium `{x : dist(x, [p, q]) ≤ τ}`.
fn stadium_section(p: Point, q: Point, tau: f64, y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in [p, q] {
        let dy = y - c[1];
        if dy.abs() <= tau {
            let w = (tau * tau - dy * dy).sqrt();
            lo = lo.min(c[0] - w);
            hi = hi.max(c[0] + w);
        }
    }
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let len = dx.hypot(dy);
    if len > 0.0 {
        let n = [-dy / len * tau, dx / len * tau];
        let rect = [
            [p[0] + n[0], p[1] + n[1]],
            [q[0] + n[0], q[1] + n[1]],
            [q[0] - n[0], q[1] - n[1]],
            [p[0] - n[0], p[1] - n[1]],
        ];
        for k in 0..4 {
            let (a, b) = (rect[k], rect[(k + 1) % 4]);
            if (a[1] - y) * (b[1] - y) <= 0.0 {
                if a[1] == b[1] {
                    lo = lo.min(a[0].min(b[0]));
                    hi = hi.max(a[0].max(b[0]));
                } else {
                    let x = a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
    }
    (hi > lo).then_some((lo, hi))
}

/// Exact area of `{x : dist(x, ∂P) ≤ τ}` for the union of closed polygonal
/// loops `∂P`, by adaptive integration over `y` of the exact length of the
/// union of stadium sections.
pub fn polygon_band_area(loops: &[Vec<Point>], tau: f64) -> f64 {
    let mut edges: Vec<(Point, Point)> = Vec::new();
    for l in loops {
        for i in 0..l.len() {
            edges.push((l[i], l[(i + 1) % l.len()]));
        }
    }
    if edges.is_empty() {
        return 0.0;
    }
    let ymin = edges.iter().map(|e| e.0[1].min(e.1[1])).fold(f64::INFINITY, f64::min) - tau;
    let ymax = edges.iter().map(|e| e.0[1].max(e.1[1])).fold(f64::NEG_INFINITY, f64::max) + tau;
    // Bucket edges by the y-range of their stadium.
    let nb = edges.len().max(1);
    let bh = (ymax - ymin) / nb as f64;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (k, e) in edges.iter().enumerate() {
        let lo = e.0[1].min(e.1[1]) - tau;
        let hi = e.0[1].max(e.1[1]) + tau;
        let b0 = (((lo - ymin) / bh).floor().max(0.0) as usize).min(nb - 1);
        let b1 = (((hi - ymin) / bh).floor().max(0.0) as usize).min(nb - 1);
        for b in &mut buckets[b0..=b1] {
            b.push(k);
        }
    }
    let length_at = |y: f64| -> f64 {
        let b = (((y - ymin) / bh).floor().max(0.0) as usize).min(nb - 1);
        let mut ivs: Vec<(f64, f64)> =
            buckets[b].iter().filter_map(|&k| stadium_section(edges[k].0, edges[k].1, tau, y)).collect();
        ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut total = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (a, b) in ivs {
            match cur {
                Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
                Some((ca, cb)) => {
                    total += cb - ca;
                    cur = Some((a, b));
                }
                None => cur = Some((a, b)),
            }
        }
        if let Some((a, b)) = cur {
            total += b - a;
        }
        total
    };
    let mut breaks: Vec<f64> = Vec::with_capacity(edges.len() * 8);
    for (p, q) in &edges {
        breaks.extend([p[1] - tau, p[1] + tau, q[1] - tau, q[1] + tau]);
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let len = dx.hypot(dy);
        if len > 0.0 {
            let ny = dx / len * tau;
            breaks.extend([p[1] + ny, p[1] - ny, q[1] + ny, q[1] - ny]);
        }
    }
    // Offset lines of consecutive edges meet at the kinks of the band
    // boundary near each vertex.
    for l in loops {
        let m = l.len();
        for i in 0..m {
            let (a, p, b) = (l[(i + m - 1) % m], l[i], l[(i + 1) % m]);
            let unit_normal = |u: Point, v: Point| {
                let (dx, dy) = (v[0] - u[0], v[1] - u[1]);
                let len = dx.hypot(dy);
                [-dy / len, dx / len]
            };
            let (nu, nw) = (unit_normal(a, p), unit_normal(p, b));
            let denom = 1.0 + nu[0] * nw[0] + nu[1] * nw[1];
            if denom > 1e-12 {
                let off = tau * (nu[1] + nw[1]) / denom;
                breaks.extend([p[1] + off, p[1] - off]);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * (1.0 + b.abs()));
    let scale = (ymax - ymin) * tau;
    let tol = 1e-13 * scale / breaks.len() as f64;
    breaks.windows(2).map(|w| adaptive_gk(length_at, w[0], w[1], tol, 18)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_band_is_exact_annulus() {
        let d = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
        let b = boundary_band(&d, 0.1).unwrap();
        assert!((b.band_area - 0.4 * PI).abs() < 1e-14 && b.exact);
        assert!((b.band_region.area() - 0.4 * PI).abs() < 0.02);
    }

    #[test]
    fn square_band_matches_corner_formula() {
        let sq = Patch::single(Shape::rectangle(0.0, 0.0, 1.0, 1.0));
        let b = boundary_band(&sq, 0.05).unwrap();
        let exact = 0.4 + 4.0 * 0.05f64.powi(2) * (PI / 4.0 - 1.0);
        assert!((b.band_area - exact).abs() < 1e-10, "{} vs {exact}", b.band_area);
        assert!(b.band_area <= 0.4);
    }

    #[test]
    fn regular_polygon_band_matches_local_formula() {
        // For a convex polygon and τ below the local feature size the band
        // area is 2Pτ + τ² Σ (θ/2 − tan(θ/2)) over turning angles θ.
        let n = 64;
        let loops = vec![(0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect::<Vec<_>>()];
        let side = 2.0 * (PI / n as f64).sin();
        let tau = 0.01;
        let theta = 2.0 * PI / n as f64;
        let exact = 2.0 * n as f64 * side * tau + tau * tau * n as f64 * (theta / 2.0 - (theta / 2.0).tan());
        let v = polygon_band_area(&loops, tau);
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn huge_tau_is_not_an_error() {
        let sq = Patch::single(Shape::rectangle(0.0, 0.0, 1.0, 1.0));
        let b = boundary_band(&sq, 10.0).unwrap();
        assert!(b.band_area > 0.0);
        assert!(boundary_band(&sq, 0.0).is_err());
    }
}
