//! Sampled scalar functions on uniform grids.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point};

/// Cell-centred samples of a scalar function: sample `(i, j)` sits at
/// `grid.center(i, j)` and stands for the value on the whole cell when
/// the field is integrated.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    /// Carrier grid.
    pub grid: Grid,
    /// Samples, index `j * nx + i`.
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    origin: Point,
    h: f64,
    nx: usize,
    ny: usize,
}

impl ScalarField {
    /// Samples `f` at the cell centres of `grid`.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64 + Sync) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|k| f(grid.center(k % grid.nx, k / grid.nx))).collect();
        Self { grid, values }
    }

    /// Checks finiteness, the sample count, and (when `compact` is set)
    /// that the outermost ring of cells vanishes, i.e. the support lies
    /// strictly inside the grid.
    pub fn validate(&self, compact: bool) -> Result<()> {
        self.grid.validate()?;
        if self.values.len() != self.grid.len() {
            return Err(Error::Format(format!("field has {} samples, grid needs {}", self.values.len(), self.grid.len())));
        }
        if let Some(k) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("sample {k} is not finite")));
        }
        if compact {
            let (nx, ny) = (self.grid.nx, self.grid.ny);
            let border = (0..nx).flat_map(|i| [(i, 0), (i, ny - 1)]).chain((0..ny).flat_map(|j| [(0, j), (nx - 1, j)]));
            for (i, j) in border {
                if self.get(i, j) != 0.0 {
                    return Err(Error::Domain("field support touches the grid border".into()));
                }
            }
        }
        Ok(())
    }

    /// Sample `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    /// Largest sample.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest sample.
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `‖f‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Midpoint-rule integral `Σ f h²`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.h * self.grid.h
    }

    /// Discrete `‖∇f‖_∞` by centred differences (one-sided at the border).
    pub fn gradient_sup(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let (gx, gy) = self.gradient_at(i, j);
                m = m.max(gx.hypot(gy));
            }
        }
        m
    }

    /// Discrete gradient at sample `(i, j)`.
    pub fn gradient_at(&self, i: usize, j: usize) -> (f64, f64) {
        let (nx, ny, h) = (self.grid.nx, self.grid.ny, self.grid.h);
        let d = |a: f64, b: f64, span: f64| (b - a) / (span * h);
        let gx = match (i > 0, i + 1 < nx) {
            (true, true) => d(self.get(i - 1, j), self.get(i + 1, j), 2.0),
            (false, true) => d(self.get(i, j), self.get(i + 1, j), 1.0),
            (true, false) => d(self.get(i - 1, j), self.get(i, j), 1.0),
            _ => 0.0,
        };
        let gy = match (j > 0, j + 1 < ny) {
            (true, true) => d(self.get(i, j - 1), self.get(i, j + 1), 2.0),
            (false, true) => d(self.get(i, j), self.get(i, j + 1), 1.0),
            (true, false) => d(self.get(i, j - 1), self.get(i, j), 1.0),
            _ => 0.0,
        };
        (gx, gy)
    }

    /// Bilinear interpolation between cell centres (zero outside the grid).
    pub fn interpolate(&self, p: Point) -> f64 {
        let g = &self.grid;
        let u = (p[0] - g.origin[0]) / g.h - 0.5;
        let v = (p[1] - g.origin[1]) / g.h - 0.5;
        let (i0, j0) = (u.floor(), v.floor());
        let (fu, fv) = (u - i0, v - j0);
        let at = |i: f64, j: f64| {
            if i < 0.0 || j < 0.0 || i as usize >= g.nx || j as usize >= g.ny {
                0.0
            } else {
                self.get(i as usize, j as usize)
            }
        };
        (1.0 - fu) * (1.0 - fv) * at(i0, j0)
            + fu * (1.0 - fv) * at(i0 + 1.0, j0)
            + (1.0 - fu) * fv * at(i0, j0 + 1.0)
            + fu * fv * at(i0 + 1.0, j0 + 1.0)
    }

    /// Writes the file format: one JSON header line with the raster grid
    /// fields (`origin`, `h`, `nx`, `ny`) followed by the samples as
    /// little-endian `f64`, row-major.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = Header { origin: self.grid.origin, h: self.grid.h, nx: self.grid.nx, ny: self.grid.ny };
        let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the file format written by [`ScalarField::write_to`].
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("field file: missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| Error::Format(format!("field header: {e}")))?;
        let grid = Grid { origin: header.origin, h: header.h, nx: header.nx, ny: header.ny };
        grid.validate()?;
        let data = &bytes[nl + 1..];
        if data.len() != 8 * grid.len() {
            return Err(Error::Format(format!("field data: {} bytes, need {}", data.len(), 8 * grid.len())));
        }
        let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap_or([0; 8]))).collect();
        let f = Self { grid, values };
        f.validate(false)?;
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_roundtrip_and_interpolation() {
        let g = Grid::covering((-1.0, -1.0, 1.0, 1.0), 40);
        let f = ScalarField::from_fn(g, |p| 2.0 * p[0] - p[1] + 0.5);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(ScalarField::read_from(buf.as_slice()).unwrap(), f);
        // Bilinear interpolation reproduces affine functions inside.
        assert!((f.interpolate([0.13, -0.41]) - (0.26 + 0.41 + 0.5)).abs() < 1e-12);
        assert!((f.gradient_sup() - 5f64.sqrt()).abs() < 1e-9);
        assert!(f.validate(true).is_err());
    }
}
