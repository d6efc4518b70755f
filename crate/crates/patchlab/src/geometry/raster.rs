//! Axis-aligned uniform grids and cell-centred indicator rasters.

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Loop, Point};
use crate::contour::marching_squares;
use crate::error::{Error, Result};

/// Uniform grid of `nx × ny` square cells of side `h`; `origin` is the
/// lower-left corner and cell `(i, j)` has centre `origin + (i + ½, j + ½)h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Lower-left corner.
    pub origin: Point,
    /// Cell side.
    pub h: f64,
    /// Cells per row.
    pub nx: usize,
    /// Rows.
    pub ny: usize,
}

impl Grid {
    /// Square grid of `n × n` cells covering `[x0, x1] × [y0, y1]` (the
    /// longer side sets the spacing), centred on the box.
    pub fn covering(bbox: (f64, f64, f64, f64), n: usize) -> Grid {
        let (x0, y0, x1, y1) = bbox;
        let side = (x1 - x0).max(y1 - y0);
        let h = side / n as f64;
        let cx = 0.5 * (x0 + x1);
        let cy = 0.5 * (y0 + y1);
        Grid { origin: [cx - 0.5 * side, cy - 0.5 * side], h, nx: n, ny: n }
    }

    /// Grid with spacing `h` symmetric about the origin, covering the box
    /// plus `pad` cells on every side; cell edges sit on multiples of `h`.
    pub fn symmetric(bbox: (f64, f64, f64, f64), h: f64, pad: usize) -> Grid {
        let (x0, y0, x1, y1) = bbox;
        let ext = x0.abs().max(x1.abs());
        let eyt = y0.abs().max(y1.abs());
        let hx = (ext / h).ceil() as usize + pad;
        let hy = (eyt / h).ceil() as usize + pad;
        Grid { origin: [-(hx as f64) * h, -(hy as f64) * h], h, nx: 2 * hx, ny: 2 * hy }
    }

    /// Checks `h > 0` and a non-empty grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || self.nx == 0 || self.ny == 0 {
            return Err(Error::DegenerateGeometry(format!(
                "grid spacing {} with {}×{} cells",
                self.h, self.nx, self.ny
            )));
        }
        Ok(())
    }

    /// Centre of cell `(i, j)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Point {
        [self.origin[0] + (i as f64 + 0.5) * self.h, self.origin[1] + (j as f64 + 0.5) * self.h]
    }

    /// Cell containing `p`, if any.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let i = ((p[0] - self.origin[0]) / self.h).floor();
        let j = ((p[1] - self.origin[1]) / self.h).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny {
            Some((i as usize, j as usize))
        } else {
            None
        }
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    /// True for an empty grid.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cell-centred indicator raster (row-major, row `j` at height `y_j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RasterRepr", into = "RasterRepr")]
pub struct Raster {
    /// Carrier grid.
    pub grid: Grid,
    /// Cell flags, index `j * nx + i`.
    pub cells: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct RasterRepr {
    origin: Point,
    h: f64,
    nx: usize,
    ny: usize,
    data: String,
}

impl TryFrom<RasterRepr> for Raster {
    type Error = Error;
    fn try_from(r: RasterRepr) -> Result<Self> {
        let grid = Grid { origin: r.origin, h: r.h, nx: r.nx, ny: r.ny };
        grid.validate()?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(r.data.as_bytes())
            .map_err(|e| Error::Format(format!("raster data is not base64: {e}")))?;
        let n = grid.len();
        if bytes.len() * 8 < n {
            return Err(Error::Format(format!("raster data holds {} bits, need {n}", bytes.len() * 8)));
        }
        let cells = (0..n).map(|k| bytes[k / 8] & (0x80 >> (k % 8)) != 0).collect();
        Ok(Raster { grid, cells })
    }
}

impl From<Raster> for RasterRepr {
    fn from(r: Raster) -> Self {
        let mut bytes = vec![0u8; r.cells.len().div_ceil(8)];
        for (k, &c) in r.cells.iter().enumerate() {
            if c {
                bytes[k / 8] |= 0x80 >> (k % 8);
            }
        }
        RasterRepr {
            origin: r.grid.origin,
            h: r.grid.h,
            nx: r.grid.nx,
            ny: r.grid.ny,
            data: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }
}

impl Raster {
    /// Raster with cell `(i, j)` set iff `f(centre)` holds.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> bool + Sync) -> Raster {
        use rayon::prelude::*;
        let cells = (0..grid.len())
            .into_par_iter()
            .map(|k| f(grid.center(k % grid.nx, k / grid.nx)))
            .collect();
        Raster { grid, cells }
    }

    /// Empty raster on `grid`.
    pub fn empty(grid: Grid) -> Raster {
        Raster { grid, cells: vec![false; grid.len()] }
    }

    /// Cell flag.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.grid.nx + i]
    }

    /// Sets a cell flag.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let nx = self.grid.nx;
        self.cells[j * nx + i] = v;
    }

    /// Number of filled cells.
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Area `count · h²`.
    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.h * self.grid.h
    }

    /// True iff `p` lies in a filled cell.
    pub fn contains(&self, p: Point) -> bool {
        self.grid.cell_of(p).is_some_and(|(i, j)| self.get(i, j))
    }

    /// Indicator samples on a copy of the grid padded by one empty ring.
    fn padded_samples(&self, pad_value: f64, fill: f64) -> (Vec<f64>, usize, usize, Point) {
        let (nx, ny) = (self.grid.nx + 2, self.grid.ny + 2);
        let mut v = vec![pad_value; nx * ny];
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                if self.get(i, j) {
                    v[(j + 1) * nx + i + 1] = fill;
                }
            }
        }
        let h = self.grid.h;
        (v, nx, ny, [self.grid.origin[0] - 0.5 * h, self.grid.origin[1] - 0.5 * h])
    }

    /// Boundary loops of the filled region, traced through the midpoints
    /// between filled and empty cell centres (marching squares at level ½).
    pub fn boundary_loops(&self) -> Vec<Loop> {
        let (v, nx, ny, o) = self.padded_samples(0.0, 1.0);
        marching_squares(&v, nx, ny, o, self.grid.h, 0.5)
            .into_iter()
            .map(|pts| {
                let a: f64 = (0..pts.len())
                    .map(|i| pts[i][0] * pts[(i + 1) % pts.len()][1] - pts[(i + 1) % pts.len()][0] * pts[i][1])
                    .sum();
                Loop { pts, is_hole: a < 0.0 }
            })
            .collect()
    }

    /// Perimeter estimate: length of the level-½ curve of the indicator
    /// smoothed by a Gaussian of width `2h` (the raw staircase or chamfered
    /// contours do not converge to the true perimeter).
    pub fn perimeter_estimate(&self) -> f64 {
        let pad = 8usize;
        let (nx, ny) = (self.grid.nx + 2 * pad, self.grid.ny + 2 * pad);
        let mut v = vec![0.0; nx * ny];
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                if self.get(i, j) {
                    v[(j + pad) * nx + i + pad] = 1.0;
                }
            }
        }
        let w: Vec<f64> = (-6i32..=6).map(|k| (-(k * k) as f64 / 8.0).exp()).collect();
        let ws: f64 = w.iter().sum();
        let blur = |src: &[f64], horizontal: bool| -> Vec<f64> {
            let mut out = vec![0.0; nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    let mut s = 0.0;
                    for (k, wk) in w.iter().enumerate() {
                        let d = k as i64 - 6;
                        let (ii, jj) = if horizontal { (i as i64 + d, j as i64) } else { (i as i64, j as i64 + d) };
                        if ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny {
                            s += wk * src[jj as usize * nx + ii as usize];
                        }
                    }
                    out[j * nx + i] = s / ws;
                }
            }
            out
        };
        let v = blur(&blur(&v, true), false);
        let h = self.grid.h;
        let o = [self.grid.origin[0] - (pad as f64 - 0.5) * h, self.grid.origin[1] - (pad as f64 - 0.5) * h];
        marching_squares(&v, nx, ny, o, h, 0.5).iter().map(|l| super::loop_perimeter(l)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitpacked_roundtrip() {
        let grid = Grid { origin: [-1.0, -1.0], h: 0.1, nx: 13, ny: 7 };
        let r = Raster::from_fn(grid, |p| p[0] * p[1] > 0.0);
        let text = serde_json::to_string(&r).unwrap();
        let back: Raster = serde_json::from_str(&text).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn raster_boundary_loops_classify_holes() {
        let grid = Grid::covering((-2.0, -2.0, 2.0, 2.0), 80);
        let r = Raster::from_fn(grid, |p| {
            let d = p[0].hypot(p[1]);
            d > 0.8 && d < 1.8
        });
        let loops = r.boundary_loops();
        assert_eq!(loops.len(), 2);
        assert_eq!(loops.iter().filter(|l| l.is_hole).count(), 1);
    }

    #[test]
    fn perimeter_estimate_converges() {
        let grid = Grid::covering((-1.2, -1.2, 1.2, 1.2), 256);
        let r = Raster::from_fn(grid, |p| p[0].hypot(p[1]) < 1.0);
        let p = r.perimeter_estimate();
        assert!((p - 2.0 * std::f64::consts::PI).abs() < 0.02, "{p}");
    }
}
