//! Marching-squares extraction of closed level curves from grid samples.

use std::collections::HashMap;

use crate::geometry::Point;

/// Identifies a grid edge: `(orientation, i, j)` with orientation 0 for the
/// horizontal edge `(i,j)–(i+1,j)` and 1 for the vertical edge `(i,j)–(i,j+1)`.
type EdgeKey = (u8, usize, usize);

/// Extracts the closed curves `{v = level}` from samples `v[j*nx + i]`
/// located at `origin + (i, j)·h`.
///
/// Curves are oriented with the super-level region `{v > level}` on their
/// left, so outer boundaries are counter-clockwise and holes clockwise.
/// Saddle cells are resolved by the value of the bilinear interpolant at
/// its saddle point (asymptotic decider).  Open curves
/// (touching the grid border) are discarded; callers pad their data when
/// the super-level set may reach the border.
pub fn marching_squares(values: &[f64], nx: usize, ny: usize, origin: Point, h: f64, level: f64) -> Vec<Vec<Point>> {
    let val = |i: usize, j: usize| values[j * nx + i];
    let high = |i: usize, j: usize| val(i, j) > level;
    let point_on = |k: EdgeKey| -> Point {
        let (o, i, j) = k;
        let (a, b) = if o == 0 { (val(i, j), val(i + 1, j)) } else { (val(i, j), val(i, j + 1)) };
        let t = if b != a { ((level - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
        if o == 0 {
            [origin[0] + (i as f64 + t) * h, origin[1] + j as f64 * h]
        } else {
            [origin[0] + i as f64 * h, origin[1] + (j as f64 + t) * h]
        }
    };
    let mut next: HashMap<EdgeKey, EdgeKey> = HashMap::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            // Corners counter-clockwise and the edge following each corner.
            let corners = [high(i, j), high(i + 1, j), high(i + 1, j + 1), high(i, j + 1)];
            let edges: [EdgeKey; 4] = [(0, i, j), (1, i + 1, j), (0, i, j + 1), (1, i, j)];
            let starts: Vec<usize> = (0..4).filter(|&e| corners[e] && !corners[(e + 1) % 4]).collect();
            let ends: Vec<usize> = (0..4).filter(|&e| !corners[e] && corners[(e + 1) % 4]).collect();
            match starts.len() {
                0 => {}
                1 => {
                    next.insert(edges[starts[0]], edges[ends[0]]);
                }
                _ => {
                    // Asymptotic decider: value of the bilinear interpolant at
                    // its saddle point.
                    let (v00, v10, v11, v01) = (val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1));
                    let den = v00 + v11 - v10 - v01;
                    let saddle = if den != 0.0 { (v00 * v11 - v10 * v01) / den } else { 0.25 * (v00 + v10 + v11 + v01) };
                    let joined = saddle > level;
                    for &s in &starts {
                        let e = if joined { (s + 1) % 4 } else { (s + 3) % 4 };
                        next.insert(edges[s], edges[e]);
                    }
                }
            }
        }
    }
    let mut keys: Vec<EdgeKey> = next.keys().copied().collect();
    keys.sort_unstable();
    let mut used: HashMap<EdgeKey, bool> = HashMap::new();
    let mut loops = Vec::new();
    for start in keys {
        if used.contains_key(&start) {
            continue;
        }
        let mut pts = Vec::new();
        let mut k = start;
        let mut closed = false;
        loop {
            used.insert(k, true);
            pts.push(point_on(k));
            match next.get(&k) {
                Some(&n) if n == start => {
                    closed = true;
                    break;
                }
                Some(&n) if !used.contains_key(&n) => k = n,
                _ => break,
            }
        }
        if closed {
            dedup_loop(&mut pts, 1e-12 * h);
            if pts.len() >= 3 {
                loops.push(pts);
            }
        }
    }
    loops
}

fn dedup_loop(pts: &mut Vec<Point>, eps: f64) {
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= eps && (a[1] - b[1]).abs() <= eps);
    while pts.len() > 1 {
        let (f, l) = (pts[0], pts[pts.len() - 1]);
        if (f[0] - l[0]).abs() <= eps && (f[1] - l[1]).abs() <= eps {
            pts.pop();
        } else {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(nx: usize, f: impl Fn(f64, f64) -> f64, h: f64, o: f64) -> Vec<f64> {
        let mut v = vec![0.0; nx * nx];
        for j in 0..nx {
            for i in 0..nx {
                v[j * nx + i] = f(o + i as f64 * h, o + j as f64 * h);
            }
        }
        v
    }

    fn signed_area(p: &[Point]) -> f64 {
        (0..p.len()).map(|i| p[i][0] * p[(i + 1) % p.len()][1] - p[(i + 1) % p.len()][0] * p[i][1]).sum::<f64>() / 2.0
    }

    #[test]
    fn circle_contour_is_ccw_with_right_area() {
        let n = 201;
        let h = 3.0 / (n - 1) as f64;
        let v = sample(n, |x, y| 1.0 - (x * x + y * y), h, -1.5);
        let loops = marching_squares(&v, n, n, [-1.5, -1.5], h, 0.0);
        assert_eq!(loops.len(), 1);
        let a = signed_area(&loops[0]);
        assert!((a - std::f64::consts::PI).abs() < 1e-3, "area {a}");
    }

    #[test]
    fn annulus_contours_have_opposite_orientation() {
        let n = 201;
        let h = 5.0 / (n - 1) as f64;
        let v = sample(n, |x, y| -((x * x + y * y).sqrt() - 1.5).powi(2), h, -2.5);
        let loops = marching_squares(&v, n, n, [-2.5, -2.5], h, -0.25);
        assert_eq!(loops.len(), 2);
        let mut areas: Vec<f64> = loops.iter().map(|l| signed_area(l)).collect();
        areas.sort_by(f64::total_cmp);
        assert!(areas[0] < 0.0 && areas[1] > 0.0);
        assert!((areas[1] + areas[0] - std::f64::consts::PI * (4.0 - 1.0)).abs() < 1e-2);
    }
}
