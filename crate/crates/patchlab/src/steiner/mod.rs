//! Continuous Steiner symmetrization of sets and densities, the energies
//! `𝓔 = 𝓘 + 𝒱` along the flow, and finite-difference derivative studies.
//!
//! Sets are carried as one exact [`IntervalSet`] per grid row (the row
//! through the cell centres at height `y_j`, standing for the whole row of
//! cells).  Symmetrization acts on the rows exactly; rasters are produced
//! only at the end, so no per-step raster error accumulates.  Energies use
//! the exact fractional coverage of each cell by the row intervals, which
//! conserves mass to roundoff and varies continuously with `τ`.

mod energy;
mod interval;

pub use energy::{energies, Confinement, Energies, InteractionOperator};
pub use interval::{containment_excess_1d, msym_1d};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{patch_section, Grid, IntervalSet, Patch, Raster, Shape};
use crate::potential::ScalarField;
use crate::quad::linear_fit;
use crate::special::KernelSpec;

/// Symmetrization direction; the symmetry line is `{x_k = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Sections along `e₁`, symmetric about `{x₁ = 0}`.
    X,
    /// Sections along `e₂`, symmetric about `{x₂ = 0}`.
    Y,
}

/// A planar set stored as exact row sections: `rows[j]` is the section at
/// height `grid.center(·, j)`, extended over the height of the cell row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSet {
    /// Carrier grid; wide enough to hold every `S^τ` of the set.
    pub grid: Grid,
    /// One section per grid row.
    pub rows: Vec<IntervalSet>,
}

impl RowSet {
    /// Rows of a raster (cell-aligned intervals).
    pub fn from_raster(r: &Raster) -> RowSet {
        let g = r.grid;
        let rows = (0..g.ny)
            .map(|j| {
                let mut ivs = Vec::new();
                let mut i = 0;
                while i < g.nx {
                    if r.get(i, j) {
                        let start = i;
                        while i < g.nx && r.get(i, j) {
                            i += 1;
                        }
                        ivs.push((g.origin[0] + start as f64 * g.h, g.origin[0] + i as f64 * g.h));
                    } else {
                        i += 1;
                    }
                }
                IntervalSet::from_unsorted(ivs)
            })
            .collect();
        RowSet { grid: g, rows }.fitted()
    }

    /// Exact sections of a patch at the row heights of `grid`.
    pub fn from_patch(patch: &Patch, grid: Grid) -> Result<RowSet> {
        grid.validate()?;
        let rows = (0..grid.ny)
            .into_par_iter()
            .map(|j| patch_section(patch, [1.0, 0.0], grid.center(0, j)[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(RowSet { grid, rows }.fitted())
    }

    /// Widens the grid (same spacing and alignment) so that it contains
    /// every row's extent and `[−L/2, L/2]` for the longest row length `L`,
    /// which bounds `S^τ` for all `τ`.
    fn fitted(mut self) -> RowSet {
        let g = self.grid;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in &self.rows {
            if let (Some(a), Some(b)) = (r.intervals().first(), r.intervals().last()) {
                let half = 0.5 * r.total_length();
                lo = lo.min(a.0).min(-half);
                hi = hi.max(b.1).max(half);
            }
        }
        if lo.is_finite() {
            let x1 = g.origin[0] + g.nx as f64 * g.h;
            let add_l = if lo < g.origin[0] + g.h { ((g.origin[0] - lo) / g.h).ceil().max(0.0) as usize + 1 } else { 0 };
            let add_r = if hi > x1 - g.h { ((hi - x1) / g.h).ceil().max(0.0) as usize + 1 } else { 0 };
            self.grid = Grid { origin: [g.origin[0] - add_l as f64 * g.h, g.origin[1]], h: g.h, nx: g.nx + add_l + add_r, ny: g.ny };
        }
        self
    }

    /// Row-wise `M^τ`.
    pub fn symmetrized(&self, tau: f64) -> RowSet {
        RowSet { grid: self.grid, rows: self.rows.par_iter().map(|r| msym_1d(r, tau)).collect() }
    }

    /// Every row shifted by `dx` along the rows (`|dx|` at most one cell,
    /// which the widened grid always has room for).
    pub fn translated(&self, dx: f64) -> RowSet {
        let dx = dx.clamp(-self.grid.h, self.grid.h);
        let rows = self.rows.iter().map(|r| IntervalSet::from_unsorted(r.intervals().iter().map(|&(a, b)| (a + dx, b + dx)).collect())).collect();
        RowSet { grid: self.grid, rows }
    }

    /// Area `h Σ_j |D_j|`.
    pub fn area(&self) -> f64 {
        self.grid.h * self.rows.iter().map(IntervalSet::total_length).sum::<f64>()
    }

    /// Exact `∫|x|²` of the row set.
    pub fn second_moment(&self) -> f64 {
        let h = self.grid.h;
        self.rows
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let y = self.grid.center(0, j)[1];
                r.intervals().iter().map(|&(a, b)| h * (b.powi(3) - a.powi(3)) / 3.0 + (b - a) * (y * y * h + h.powi(3) / 12.0)).sum::<f64>()
            })
            .sum()
    }

    /// Total number of interval endpoints (partially covered cells).
    pub fn endpoint_count(&self) -> usize {
        self.rows.iter().map(|r| 2 * r.len()).sum()
    }

    /// True when every non-empty row is a single interval centred at 0
    /// (to `tol`).
    pub fn is_steiner_symmetric(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| match r.intervals() {
            [] => true,
            [(a, b)] => (a + b).abs() <= tol,
            _ => false,
        })
    }

    /// Exact fractional coverage of every cell.
    pub fn coverage(&self) -> ScalarField {
        let g = self.grid;
        let mut values = vec![0.0; g.len()];
        for (j, r) in self.rows.iter().enumerate() {
            for &(a, b) in r.intervals() {
                let i0 = (((a - g.origin[0]) / g.h).floor().max(0.0) as usize).min(g.nx - 1);
                let i1 = (((b - g.origin[0]) / g.h).ceil().max(0.0) as usize).min(g.nx);
                for i in i0..i1 {
                    let (x0, x1) = (g.origin[0] + i as f64 * g.h, g.origin[0] + (i + 1) as f64 * g.h);
                    let len = b.min(x1) - a.max(x0);
                    if len > 0.0 {
                        values[j * g.nx + i] += len / g.h;
                    }
                }
            }
        }
        ScalarField { grid: g, values }
    }

    /// Raster that keeps every interval's cell count: an interval of
    /// length `k h` fills the `k` cells starting at the cell edge nearest to
    /// its left end (cell-aligned input is reproduced exactly).
    pub fn to_raster(&self) -> Raster {
        let g = self.grid;
        let mut out = Raster::empty(g);
        for (j, r) in self.rows.iter().enumerate() {
            for &(a, b) in r.intervals() {
                let count = ((b - a) / g.h).round() as i64;
                let start = ((a - g.origin[0]) / g.h).round() as i64;
                for i in start.max(0)..(start + count).min(g.nx as i64) {
                    out.set(i as usize, j, true);
                }
            }
        }
        out
    }

    /// `max` over cells that differ between the rasters of `self` and
    /// `other` (same grid) of the distance from the cell centre to the
    /// nearest boundary point of `self` on the same row, minus `τ + h√2`.
    /// Row distances bound the planar distance to `∂D` from above, so a
    /// non-positive value certifies containment in the `τ + h√2` band.
    pub fn containment_excess(&self, other: &RowSet, tau: f64) -> f64 {
        let (ra, rb) = (self.to_raster(), other.to_raster());
        let g = self.grid;
        let mut worst = f64::NEG_INFINITY;
        for j in 0..g.ny {
            let ends: Vec<f64> = self.rows[j].endpoints().collect();
            for i in 0..g.nx {
                if ra.get(i, j) != rb.get(i, j) {
                    let x = g.center(i, j)[0];
                    let d = ends.iter().map(|e| (x - e).abs()).fold(f64::INFINITY, f64::min);
                    worst = worst.max(d - tau - g.h * 2f64.sqrt());
                }
            }
        }
        worst
    }
}

fn transposed_raster(r: &Raster) -> Raster {
    let g = r.grid;
    let tg = Grid { origin: [g.origin[1], g.origin[0]], h: g.h, nx: g.ny, ny: g.nx };
    let mut out = Raster::empty(tg);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if r.get(i, j) {
                out.set(j, i, true);
            }
        }
    }
    out
}

fn single_raster(patch: &Patch) -> Result<&Raster> {
    match patch.components.as_slice() {
        [Shape::Raster(r)] => Ok(r),
        _ => Err(Error::Domain("Steiner symmetrization of sets needs a single raster component; rasterize first".into())),
    }
}

/// `S^τ[D]` of a raster patch along `axis`, re-rasterized with the cell
/// count of every interval kept (the grid is widened when the flow needs
/// room).
pub fn ssym_2d(patch: &Patch, tau: f64, axis: Axis) -> Result<Patch> {
    let r = single_raster(patch)?;
    let out = match axis {
        Axis::X => RowSet::from_raster(r).symmetrized(tau).to_raster(),
        Axis::Y => transposed_raster(&RowSet::from_raster(&transposed_raster(r)).symmetrized(tau).to_raster()),
    };
    Ok(Patch::single(Shape::Raster(out)))
}

/// Copy of `f` on a larger grid with the same spacing and alignment.
fn embed(f: &ScalarField, grid: Grid) -> ScalarField {
    let g = f.grid;
    let di = ((g.origin[0] - grid.origin[0]) / g.h).round() as i64;
    let dj = ((g.origin[1] - grid.origin[1]) / g.h).round() as i64;
    let mut values = vec![0.0; grid.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (ii, jj) = (i as i64 + di, j as i64 + dj);
            if ii >= 0 && jj >= 0 && (ii as usize) < grid.nx && (jj as usize) < grid.ny {
                values[jj as usize * grid.nx + ii as usize] = f.get(i, j);
            }
        }
    }
    ScalarField { grid, values }
}

/// Layer-cake decomposition of a density into super-level row sets.
#[derive(Debug, Clone)]
pub struct LayeredDensity {
    /// Super-level sets `{ω > (k + ½)Δ}` on a common widened grid.
    pub layers: Vec<RowSet>,
    /// Level step `Δ = sup ω / levels`.
    pub step: f64,
    /// The input density embedded in the widened grid.
    pub original: ScalarField,
}

impl LayeredDensity {
    /// Splits `ω ≥ 0` into `levels` midpoint super-level sets.
    pub fn new(omega: &ScalarField, levels: usize) -> Result<Self> {
        omega.validate(false)?;
        if omega.min() < 0.0 {
            return Err(Error::Domain("density must be non-negative".into()));
        }
        if levels == 0 {
            return Err(Error::Domain("level count must be positive".into()));
        }
        let step = omega.max() / levels as f64;
        let g = omega.grid;
        let mut layers: Vec<RowSet> = (0..levels)
            .map(|k| {
                let level = (k as f64 + 0.5) * step;
                RowSet::from_raster(&Raster { grid: g, cells: omega.values.iter().map(|&v| v > level).collect() })
            })
            .collect();
        // The lowest super-level set contains all others, so its widened
        // grid holds every layer's flow.
        let grid = layers.first().map_or(g, |l| l.grid);
        for l in &mut layers {
            l.grid = grid;
        }
        Ok(Self { layers, step, original: embed(omega, grid) })
    }

    /// Common grid of the layers.
    pub fn grid(&self) -> Grid {
        self.original.grid
    }

    /// `ω^τ = Δ Σ_k 1_{S^τ[U_k]}` with exact fractional coverage, and the
    /// number of partially covered cells weighted by `Δ`.
    pub fn symmetrized(&self, tau: f64) -> (ScalarField, f64) {
        let grid = self.grid();
        let mut values = vec![0.0; grid.len()];
        let mut smeared = 0.0;
        for l in &self.layers {
            let s = l.symmetrized(tau);
            smeared += self.step * s.endpoint_count() as f64;
            for (v, c) in values.iter_mut().zip(s.coverage().values) {
                *v += self.step * c;
            }
        }
        (ScalarField { grid, values }, smeared)
    }
}

/// `ω^τ` together with the checks of the density flow.
#[derive(Debug, Clone)]
pub struct SymmetrizedDensity {
    /// `ω^τ` on the widened grid.
    pub field: ScalarField,
    /// Level count.
    pub levels: usize,
    /// Level step `Δ`.
    pub level_step: f64,
    /// `∫ω`.
    pub mass_in: f64,
    /// `∫ω^τ`.
    pub mass_out: f64,
    /// `‖ω^τ − ω‖_∞`.
    pub sup_displacement: f64,
    /// `‖∇ω‖_∞ (τ + h) + Δ`: transport bound plus the cell and level
    /// quantization allowances.
    pub displacement_bound: f64,
}

impl SymmetrizedDensity {
    /// `|∫ω^τ − ∫ω| / ∫ω`.
    pub fn relative_mass_drift(&self) -> f64 {
        (self.mass_out - self.mass_in).abs() / self.mass_in.abs().max(f64::MIN_POSITIVE)
    }
}

/// Layer-cake symmetrization `ω^τ = ∫_0^{sup ω} 1_{S^τ[{ω > h}]} dh` on
/// `levels` midpoint levels.
pub fn ssym_density(omega: &ScalarField, tau: f64, levels: usize) -> Result<SymmetrizedDensity> {
    let layered = LayeredDensity::new(omega, levels)?;
    let (field, _) = layered.symmetrized(tau);
    let orig = &layered.original;
    let sup_displacement = field.values.iter().zip(&orig.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(SymmetrizedDensity {
        levels,
        level_step: layered.step,
        mass_in: orig.integral(),
        mass_out: field.integral(),
        sup_displacement,
        displacement_bound: orig.gradient_sup() * (tau + orig.grid.h) + layered.step,
        field,
    })
}

/// What a trace symmetrizes.
#[derive(Debug, Clone)]
pub enum Rho {
    /// A set given by exact rows.
    Set(RowSet),
    /// A density split into layers.
    Density(LayeredDensity),
}

impl Rho {
    /// Set from a patch: rasters use their own rows, other shapes are
    /// sectioned exactly at the rows of a grid of spacing `h` symmetric
    /// about the origin.
    pub fn from_patch(patch: &Patch, h: f64) -> Result<Rho> {
        let patch = patch.normalized()?;
        if let [Shape::Raster(r)] = patch.components.as_slice() {
            return Ok(Rho::Set(RowSet::from_raster(r)));
        }
        Ok(Rho::Set(RowSet::from_patch(&patch, Grid::symmetric(patch.bbox(), h, 2))?))
    }

    /// Carrier grid.
    pub fn grid(&self) -> Grid {
        match self {
            Rho::Set(s) => s.grid,
            Rho::Density(d) => d.grid(),
        }
    }

    /// Density at `τ` and its weighted count of partially covered cells.
    pub fn at(&self, tau: f64) -> (ScalarField, f64) {
        match self {
            Rho::Set(s) => {
                let t = s.symmetrized(tau);
                (t.coverage(), t.endpoint_count() as f64)
            }
            Rho::Density(d) => d.symmetrized(tau),
        }
    }

    /// `ρ` shifted by `dx` (at most one cell) along the rows.
    pub fn translated(&self, dx: f64) -> Rho {
        match self {
            Rho::Set(s) => Rho::Set(s.translated(dx)),
            Rho::Density(d) => Rho::Density(LayeredDensity { layers: d.layers.iter().map(|l| l.translated(dx)).collect(), step: d.step, original: d.original.clone() }),
        }
    }

    /// Diameter of the bounding box of the support.
    pub fn diameter(&self) -> f64 {
        let (f, _) = self.at(0.0);
        let g = f.grid;
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for j in 0..g.ny {
            for i in 0..g.nx {
                if f.get(i, j) > 0.0 {
                    let c = g.center(i, j);
                    x0 = x0.min(c[0]);
                    x1 = x1.max(c[0]);
                    y0 = y0.min(c[1]);
                    y1 = y1.max(c[1]);
                }
            }
        }
        if x0.is_finite() {
            (x1 - x0 + g.h).hypot(y1 - y0 + g.h)
        } else {
            0.0
        }
    }
}

/// One sample of a symmetrization trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceRow {
    /// Flow time.
    pub tau: f64,
    /// Mass (area for sets).
    pub area: f64,
    /// Interaction energy `𝓘`.
    pub interaction: f64,
    /// Confinement energy `𝒱`.
    pub confinement: f64,
    /// `𝓔 = 𝓘 + 𝒱`.
    pub energy: f64,
    /// `∫|x|² ρ`.
    pub second_moment: f64,
    /// Quadrature tolerance of `𝓘` at this sample.
    pub quadrature_tol: f64,
}

/// Energies along `S^τ` on an increasing `τ`-grid starting at 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetrizationTrace {
    /// Kernel exponent `α`.
    pub alpha: f64,
    /// Angular velocity in `𝒱 = (−Ω)∫gρ`.
    pub omega: f64,
    /// Grid spacing.
    pub h: f64,
    /// Samples in increasing `τ`.
    pub rows: Vec<TraceRow>,
}

impl SymmetrizationTrace {
    /// CSV header of [`Self::to_csv`].
    pub const CSV_HEADER: &'static str = "tau,area,I,V,E,second_moment,quadrature_tol,h,alpha,omega\n";

    /// CSV export (one row per `τ`, each carrying the resolution).
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&format!(
                "{:.6e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e},{:.6e},{},{}\n",
                r.tau, r.area, r.interaction, r.confinement, r.energy, r.second_moment, r.quadrature_tol, self.h, self.alpha, self.omega
            ));
        }
        s
    }

    /// `max_τ |area(τ) − area(0)| / area(0)`.
    pub fn mass_drift(&self) -> f64 {
        let a0 = self.rows[0].area;
        self.rows.iter().map(|r| (r.area - a0).abs()).fold(0.0, f64::max) / a0.abs().max(f64::MIN_POSITIVE)
    }

    /// Largest step increase `𝓘(τ_{k+1}) − 𝓘(τ_k)` (negative when the
    /// interaction strictly decreases everywhere).
    pub fn max_interaction_increase(&self) -> f64 {
        self.rows.windows(2).map(|w| w[1].interaction - w[0].interaction).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest step increase beyond the combined quadrature tolerance of
    /// the two samples; `≤ 0` means `𝓘` is non-increasing to tolerance.
    pub fn interaction_violation(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].interaction - w[0].interaction - w[0].quadrature_tol - w[1].quadrature_tol)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Trace of `ρ` with a prepared operator on `ρ`'s grid; `τ = 0` is
/// prepended when missing.
pub fn trace_with(rho: &Rho, op: &InteractionOperator, omega: f64, g: Confinement, taus: &[f64]) -> Result<SymmetrizationTrace> {
    if op.grid() != rho.grid() {
        return Err(Error::Domain("operator grid differs from the density grid".into()));
    }
    let mut ts: Vec<f64> = taus.to_vec();
    if ts.first() != Some(&0.0) {
        ts.insert(0, 0.0);
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) || ts[0] < 0.0 {
        return Err(Error::Domain("τ-grid must be strictly increasing from 0".into()));
    }
    let rows = ts
        .iter()
        .map(|&tau| {
            let (f, smeared) = rho.at(tau);
            let e = op.energies(&f, omega, g, smeared)?;
            Ok(TraceRow {
                tau,
                area: e.mass,
                interaction: e.interaction,
                confinement: e.confinement,
                energy: e.total,
                second_moment: e.second_moment,
                quadrature_tol: e.quadrature_tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetrizationTrace { alpha: op.kernel().alpha, omega, h: op.grid().h, rows })
}

/// Trace of `ρ` (builds the operator).
pub fn trace(rho: &Rho, kernel: KernelSpec, omega: f64, g: Confinement, taus: &[f64]) -> Result<SymmetrizationTrace> {
    trace_with(rho, &InteractionOperator::new(rho.grid(), kernel)?, omega, g, taus)
}

/// `n` log-spaced flow times from `h` to `0.2·diameter`.
pub fn default_tau_grid(h: f64, diameter: f64, n: usize) -> Vec<f64> {
    let (a, b) = (h.ln(), (0.2 * diameter).max(2.0 * h).ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n.max(2) - 1) as f64).exp()).collect()
}

/// Right-derivative and decay-rate study of `𝓔` along the flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyDerivative {
    /// The trace.
    pub trace: SymmetrizationTrace,
    /// Right derivative at 0 from a least-squares fit
    /// `𝓔(τ) − 𝓔(0) ≈ aτ + bτ²` on the three smallest admissible `τ`.
    pub right_derivative: f64,
    /// Discretization jitter of `𝓘`: its largest change under sub-cell
    /// translations of `ρ` (which leave `𝓘` invariant in the continuum).
    pub translation_jitter: f64,
    /// Slope of `log|𝓔(τ) − 𝓔(0)|` against `log τ` over admissible `τ`
    /// with changes above four times the translation jitter.
    pub fitted_exponent: Option<f64>,
    /// `1 + min(δ/2, min(δ, 1))` with `δ = 2 − α`: the rate guaranteed
    /// for rotating solutions.
    pub predicted_exponent: f64,
    /// `𝓘` non-increasing to quadrature tolerance.
    pub interaction_non_increasing: bool,
    /// Largest step increase of `𝓘` beyond tolerance.
    pub interaction_violation: f64,
    /// `𝓔(τ₁) < 𝓔(0) − tol` at the smallest admissible `τ₁`.
    pub strictly_decreasing_at_start: bool,
    /// Flow times excluded from fits (below the grid spacing).
    pub excluded_taus: Vec<f64>,
    /// Diagnostics.
    pub warnings: Vec<String>,
}

/// Trace plus derivative fits; `τ < h` samples stay in the trace but are
/// excluded from the fits with a warning.
pub fn energy_derivative_fd(rho: &Rho, kernel: KernelSpec, omega: f64, g: Confinement, taus: &[f64]) -> Result<EnergyDerivative> {
    let op = InteractionOperator::new(rho.grid(), kernel)?;
    let tr = trace_with(rho, &op, omega, g, taus)?;
    let h = tr.h;
    let i0 = tr.rows[0].interaction;
    let mut jitter: f64 = 0.0;
    for frac in [0.25, 0.5, 0.75] {
        let (f, _) = rho.translated(frac * h).at(0.0);
        jitter = jitter.max((op.energies(&f, omega, g, 0.0)?.interaction - i0).abs());
    }
    let mut warnings = Vec::new();
    let excluded: Vec<f64> = tr.rows.iter().skip(1).map(|r| r.tau).filter(|&t| t < h * (1.0 - 1e-12)).collect();
    if !excluded.is_empty() {
        warnings.push(format!("{} flow time(s) below the grid spacing {h:.3e} excluded from the fits", excluded.len()));
    }
    let e0 = tr.rows[0].energy;
    let tol0 = tr.rows[0].quadrature_tol;
    let adm: Vec<&TraceRow> = tr.rows.iter().skip(1).filter(|r| r.tau >= h * (1.0 - 1e-12)).collect();
    let right_derivative = {
        let pts: Vec<(f64, f64)> = adm.iter().take(3).map(|r| (r.tau, r.energy - e0)).collect();
        match pts.len() {
            0 => f64::NAN,
            1 => pts[0].1 / pts[0].0,
            _ if pts.len() == 2 => {
                // Exact fit of aτ + bτ² through two points.
                let ((t1, d1), (t2, d2)) = (pts[0], pts[1]);
                (d1 * t2 * t2 - d2 * t1 * t1) / (t1 * t2 * (t2 - t1))
            }
            _ => {
                let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for &(t, d) in &pts {
                    s11 += t * t;
                    s12 += t * t * t;
                    s22 += t.powi(4);
                    r1 += t * d;
                    r2 += t * t * d;
                }
                (r1 * s22 - r2 * s12) / (s11 * s22 - s12 * s12)
            }
        }
    };
    let fit: Vec<(f64, f64)> = adm
        .iter()
        .filter(|r| (r.energy - e0).abs() > 4.0 * jitter)
        .map(|r| (r.tau.ln(), (r.energy - e0).abs().ln()))
        .collect();
    let fitted_exponent = if fit.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        Some(linear_fit(&x, &y).0)
    } else {
        warnings.push("fewer than two energy changes above the jitter floor; no exponent fitted".into());
        None
    };
    let delta = kernel.holder_delta();
    let violation = tr.interaction_violation();
    let strictly = adm.first().is_some_and(|r| r.energy < e0 - tol0 - r.quadrature_tol);
    Ok(EnergyDerivative {
        right_derivative,
        translation_jitter: jitter,
        fitted_exponent,
        predicted_exponent: 1.0 + (0.5 * delta).min(delta.min(1.0)),
        interaction_non_increasing: violation <= 0.0,
        interaction_violation: violation,
        strictly_decreasing_at_start: strictly,
        excluded_taus: excluded,
        warnings,
        trace: tr,
    })
}

/// Seeded random raster on an `n × n` grid over `[−1.6, 1.6]²`: the union
/// of three to five ellipses with centres in `[−0.8, 0.8]²`, semi-axes in
/// `[0.2, 0.6]` and random orientation (ChaCha8 generator).
pub fn random_blob_raster(seed: u64, n: usize) -> Raster {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(3..=5);
    let blobs: Vec<[f64; 5]> = (0..k)
        .map(|_| {
            [
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
                rng.gen_range(0.2..0.6),
                rng.gen_range(0.2..0.6),
                rng.gen_range(0.0..std::f64::consts::PI),
            ]
        })
        .collect();
    let grid = Grid::covering((-1.6, -1.6, 1.6, 1.6), n);
    Raster::from_fn(grid, |p| {
        blobs.iter().any(|&[cx, cy, a, b, t]| {
            let (dx, dy) = (p[0] - cx, p[1] - cy);
            let (u, v) = (dx * t.cos() + dy * t.sin(), -dx * t.sin() + dy * t.cos());
            (u / a).powi(2) + (v / b).powi(2) < 1.0
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_raster(c: [f64; 2], r: f64, n: usize) -> Raster {
        let g = Grid::covering((-2.0, -2.0, 2.0, 2.0), n);
        Raster::from_fn(g, |p| (p[0] - c[0]).hypot(p[1] - c[1]) < r)
    }

    #[test]
    fn shifted_disk_recentres_in_one_unit_of_time() {
        let r = disk_raster([0.5, 0.0], 0.75, 128);
        let p = Patch::single(Shape::Raster(r.clone()));
        let out = ssym_2d(&p, 0.5, Axis::X).unwrap();
        let Shape::Raster(o) = &out.components[0] else { unreachable!() };
        assert_eq!(o.count(), r.count());
        // The grid spacing is 1/32, so a shift of 0.5 is 16 whole cells and
        // the result is exactly the raster of the centred disk.
        let centred = disk_raster([0.0, 0.0], 0.75, 128);
        assert_eq!(o, &centred);
    }

    #[test]
    fn centred_disk_is_a_fixed_point() {
        let g = Grid::symmetric((-1.0, -1.0, 1.0, 1.0), 1.0 / 32.0, 2);
        let r = Raster::from_fn(g, |p| p[0].hypot(p[1]) < 0.8);
        let s = RowSet::from_raster(&r);
        assert!(s.is_steiner_symmetric(1e-12));
        assert_eq!(s.symmetrized(0.7).rows, s.rows);
    }

    #[test]
    fn vertical_axis_matches_transposition() {
        let r = disk_raster([0.0, 0.6], 0.5, 64);
        let p = Patch::single(Shape::Raster(r.clone()));
        let Shape::Raster(o) = &ssym_2d(&p, 0.6, Axis::Y).unwrap().components[0] else { unreachable!() };
        assert_eq!(o.count(), r.count());
        let c = o.boundary_loops()[0].pts.iter().fold([0.0, 0.0], |a, q| [a[0] + q[0], a[1] + q[1]]);
        let n = o.boundary_loops()[0].pts.len() as f64;
        assert!((c[1] / n).abs() < 0.05, "{}", c[1] / n);
    }

    #[test]
    fn coverage_is_exact_and_mass_is_conserved() {
        let p = Patch::single(Shape::Ellipse { center: [0.3, -0.2], a: 1.0, b: 0.5, angle: 0.5 });
        let Rho::Set(s) = Rho::from_patch(&p, 0.05).unwrap() else { unreachable!() };
        let a0 = s.area();
        for tau in [0.0, 0.1, 0.37, 2.0] {
            let t = s.symmetrized(tau);
            assert!((t.area() - a0).abs() < 1e-12 * a0);
            assert!((t.coverage().integral() - a0).abs() < 1e-11 * a0);
        }
        // Midpoint rule across the rows: O(h^{3/2}) error from the tips.
        assert!((a0 / (std::f64::consts::PI * 0.5) - 1.0).abs() < 5e-3, "{a0}");
    }

    #[test]
    fn newtonian_disk_self_energy() {
        // ∫_B (1_B * N) = 2π ∫_0^1 (r² − 1)/4 · r dr = −π/8.
        let p = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
        let rho = Rho::from_patch(&p, 1.0 / 64.0).unwrap();
        let (f, n) = rho.at(0.0);
        let e = InteractionOperator::new(f.grid, KernelSpec::newtonian()).unwrap().energies(&f, -1.0, Confinement::Quadratic, n).unwrap();
        let exact = -std::f64::consts::PI / 8.0;
        assert!((e.interaction - exact).abs() < 2e-3 * exact.abs(), "{}", e.interaction);
        assert!((e.interaction - exact).abs() <= e.quadrature_tol + 1e-4, "{} vs tol {}", e.interaction - exact, e.quadrature_tol);
        assert!((e.confinement - std::f64::consts::FRAC_PI_2).abs() < 2e-3);
    }
}
