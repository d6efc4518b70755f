//! Interaction and confinement energies of cell densities.
//!
//! A density constant on the cells of a grid has potential
//! `ψ(c) = Σ_y ω_y ∫_{cell y} K(|c − z|) dz` at the cell centres, with the
//! cell integrals taken exactly (through the boundary formula of the
//! potential module) for cells within three cells of the target and by the
//! midpoint rule beyond.  The sum is a discrete convolution with a fixed
//! table and is evaluated by zero-padded FFTs.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point};
use crate::potential::{square_value, ScalarField};
use crate::special::KernelSpec;

/// Cells (per axis, either side) integrated exactly in the kernel table.
const NEAR_CELLS: i64 = 3;

/// Radial confinement `g(|x|)` with `g′ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Confinement {
    /// `g = |x|²` (the rotating-frame potential).
    Quadratic,
    /// `g = |x|^p`, `p > 0`.
    Power(f64),
}

impl Confinement {
    /// `g(x)`.
    pub fn eval(&self, x: Point) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match *self {
            Confinement::Quadratic => r2,
            Confinement::Power(p) => r2.powf(0.5 * p),
        }
    }

    /// Checks `g′ > 0`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Confinement::Power(p) if !(p > 0.0) => Err(Error::Domain(format!("confinement exponent must be positive, got {p}"))),
            _ => Ok(()),
        }
    }

    /// Cell average of `g` by the 2×2 Gauss rule (exact for `|x|²`).
    fn cell_average(&self, c: Point, h: f64) -> f64 {
        let s = 0.5 * h / 3f64.sqrt();
        [[-s, -s], [s, -s], [-s, s], [s, s]].iter().map(|d| self.eval([c[0] + d[0], c[1] + d[1]])).sum::<f64>() / 4.0
    }
}

/// `𝓘`, `𝒱` and `𝓔 = 𝓘 + 𝒱` of one density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    /// `𝓘 = ∫∫ ω(x) ω(y) K(x − y)`.
    pub interaction: f64,
    /// `𝒱 = (−Ω) ∫ g ω`.
    pub confinement: f64,
    /// `𝓔 = 𝓘 + 𝒱`.
    pub total: f64,
    /// `∫ω`.
    pub mass: f64,
    /// `∫|x|² ω`.
    pub second_moment: f64,
    /// Bound on the error of `𝓘` caused by representing a set through
    /// fractional cell coverage: `2 h³ ‖∇ψ‖_∞` per partially covered cell.
    pub quadrature_tol: f64,
}

/// Precomputed FFT convolution with the cell-integrated kernel of one grid.
pub struct InteractionOperator {
    grid: Grid,
    kernel: KernelSpec,
    px: usize,
    py: usize,
    khat: Vec<Complex<f64>>,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
}

impl std::fmt::Debug for InteractionOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InteractionOperator").field("grid", &self.grid).field("kernel", &self.kernel).finish()
    }
}

fn transpose(src: &[Complex<f64>], rows: usize, cols: usize) -> Vec<Complex<f64>> {
    let mut dst = vec![Complex::new(0.0, 0.0); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
    dst
}

impl InteractionOperator {
    /// Builds the kernel table of `grid` and its transform.
    pub fn new(grid: Grid, kernel: KernelSpec) -> Result<Self> {
        grid.validate()?;
        let (px, py) = (2 * grid.nx, 2 * grid.ny);
        let mut planner = FftPlanner::new();
        let fwd = [planner.plan_fft_forward(px), planner.plan_fft_forward(py)];
        let inv = [planner.plan_fft_inverse(px), planner.plan_fft_inverse(py)];
        let h = grid.h;
        let mut table = vec![Complex::new(0.0, 0.0); px * py];
        let (nx, ny) = (grid.nx as i64, grid.ny as i64);
        for dj in -(ny - 1)..ny {
            for di in -(nx - 1)..nx {
                let v = if di.abs() <= NEAR_CELLS && dj.abs() <= NEAR_CELLS {
                    square_value(&kernel, [0.0, 0.0], [di as f64 * h, dj as f64 * h], h)
                } else {
                    kernel.eval(h * (di as f64).hypot(dj as f64)) * h * h
                };
                let (i, j) = (di.rem_euclid(px as i64) as usize, dj.rem_euclid(py as i64) as usize);
                table[j * px + i] = Complex::new(v, 0.0);
            }
        }
        let mut op = Self { grid, kernel, px, py, khat: Vec::new(), fwd, inv };
        op.khat = op.forward(table);
        Ok(op)
    }

    /// The grid.
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// The kernel.
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// 2D forward transform; the result is stored transposed.
    fn forward(&self, mut buf: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        self.fwd[0].process(&mut buf);
        let mut t = transpose(&buf, self.py, self.px);
        self.fwd[1].process(&mut t);
        t
    }

    /// Inverse of [`Self::forward`], normalized.
    fn inverse(&self, mut t: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        self.inv[1].process(&mut t);
        let mut buf = transpose(&t, self.px, self.py);
        self.inv[0].process(&mut buf);
        let s = 1.0 / (self.px * self.py) as f64;
        buf.iter_mut().for_each(|z| *z *= s);
        buf
    }

    /// `ψ = ω * K` at the cell centres of the grid.
    pub fn potential(&self, field: &ScalarField) -> Result<Vec<f64>> {
        if field.grid != self.grid {
            return Err(Error::Domain("density grid differs from the operator grid".into()));
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut buf = vec![Complex::new(0.0, 0.0); self.px * self.py];
        for j in 0..ny {
            for i in 0..nx {
                buf[j * self.px + i] = Complex::new(field.values[j * nx + i], 0.0);
            }
        }
        let mut t = self.forward(buf);
        t.iter_mut().zip(&self.khat).for_each(|(a, k)| *a *= k);
        let out = self.inverse(t);
        Ok((0..ny).flat_map(|j| (0..nx).map(move |i| (j, i))).map(|(j, i)| out[j * self.px + i].re).collect())
    }

    /// Energies of `field` at angular velocity `Ω`; `smeared` is the
    /// (weighted) number of partially covered cells entering the
    /// quadrature tolerance.
    pub fn energies(&self, field: &ScalarField, omega: f64, g: Confinement, smeared: f64) -> Result<Energies> {
        g.validate()?;
        let psi = self.potential(field)?;
        let grid = self.grid;
        let (nx, ny, h) = (grid.nx, grid.ny, grid.h);
        let a = h * h;
        let (mut inter, mut conf, mut mass, mut m2) = (0.0, 0.0, 0.0, 0.0);
        let mut grad: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let w = field.values[j * nx + i];
                if w == 0.0 {
                    continue;
                }
                let c = grid.center(i, j);
                inter += w * psi[j * nx + i] * a;
                conf += w * g.cell_average(c, h) * a;
                mass += w * a;
                m2 += w * (c[0] * c[0] + c[1] * c[1] + h * h / 6.0) * a;
                let d = |i2: usize, j2: usize| psi[j2 * nx + i2];
                let gx = if i > 0 && i + 1 < nx { (d(i + 1, j) - d(i - 1, j)) / (2.0 * h) } else { 0.0 };
                let gy = if j > 0 && j + 1 < ny { (d(i, j + 1) - d(i, j - 1)) / (2.0 * h) } else { 0.0 };
                grad = grad.max(gx.hypot(gy));
            }
        }
        let confinement = -omega * conf;
        Ok(Energies {
            interaction: inter,
            confinement,
            total: inter + confinement,
            mass,
            second_moment: m2,
            quadrature_tol: 2.0 * smeared * h * h * h * grad,
        })
    }
}

/// Energies of a cell density treated as exact (no coverage smearing).
pub fn energies(field: &ScalarField, kernel: KernelSpec, omega: f64, g: Confinement) -> Result<Energies> {
    InteractionOperator::new(field.grid, kernel)?.energies(field, omega, g, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Convolver;

    #[test]
    fn fft_potential_matches_direct_cell_sums() {
        let grid = Grid { origin: [-1.0, -0.75], h: 0.125, nx: 16, ny: 12 };
        let f = ScalarField::from_fn(grid, |p| (1.0 - p[0] * p[0] - 2.0 * p[1] * p[1]).max(0.0));
        for alpha in [0.0, 0.5, 1.0] {
            let k = KernelSpec::new(alpha).unwrap();
            let op = InteractionOperator::new(grid, k).unwrap();
            let psi = op.potential(&f).unwrap();
            let conv = Convolver::for_field(&f, k);
            for (i, j) in [(0, 0), (7, 5), (15, 11), (3, 9)] {
                let direct = conv.value(grid.center(i, j));
                assert!((psi[j * 16 + i] - direct).abs() < 1e-11 * direct.abs().max(1.0), "{alpha} {i} {j}");
            }
        }
    }
}
