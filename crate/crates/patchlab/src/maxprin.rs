//! Maximum-principle rigidity for fast rotation: the boundary pairing
//! `∇(1_U * K_α)(x₀)·x₀` with `U = B(0,R) ∖ D`, the threshold
//! `Ω_c(R) = R^{−α}Ω_α`, and the resulting symmetric-difference bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{symmetric_difference, Grid, Patch, Point, Raster, Shape, DEFAULT_BOUNDARY_NODES};
use crate::potential::{max_oscillation, stationarity_residual, Convolver, RotatingState, ScalarField};
use crate::special::{c_alpha, disk_riesz_radial_derivative, omega_alpha, omega_c, KernelSpec};

/// What the fast-rotation test concludes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FastRotationVerdict {
    /// `U` is empty at raster resolution: `D` is the disk `B(0,R)`.
    Disk,
    /// `Ω ≥ Ω_c(R)` while `U` is non-empty: no rotating patch can have this
    /// geometry at this angular velocity.
    InconsistentWithRotation,
    /// `Ω < Ω_c(R)`: the theorem gives no conclusion.
    BelowThreshold,
}

/// Outcome of [`fast_rotation_test`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FastRotationReport {
    /// Kernel exponent.
    pub alpha: f64,
    /// Angular velocity.
    pub omega: f64,
    /// `R = max_{x∈D}|x|`.
    pub r: f64,
    /// Farthest boundary point.
    pub x0: Point,
    /// `|U|` from the raster difference.
    pub u_area: f64,
    /// Raster cells of `U`.
    pub u_cells: usize,
    /// Raster spacing.
    pub h: f64,
    /// `αC_α ∫_U (x₀ − y)·x₀ / |x₀ − y|^{α+2} dy` by desingularized cell
    /// quadrature over the raster of `U`.
    pub pairing: f64,
    /// The same pairing as `∇(1_{B(0,R)} * K_α)(x₀)·x₀ − ∇(1_D * K_α)(x₀)·x₀`
    /// from the closed-form disk derivative and a boundary integral.
    pub pairing_boundary: f64,
    /// `Ω_c(R)`.
    pub omega_c: f64,
    /// `Ω_α`.
    pub omega_alpha: f64,
    /// Verdict.
    pub verdict: FastRotationVerdict,
    /// Oscillation of `f_Ω` on `∂D` (large when the verdict rules the
    /// geometry out).
    pub stationarity_oscillation: f64,
    /// `|D|`.
    pub area: f64,
    /// `|D △ B(0,1)|` (meaningful for `|D| = π`).
    pub disk_symmetric_difference: f64,
    /// `2π((Ω_α/Ω)^{2/α} − 1)` when `0 < Ω < Ω_α` (for `|D| = π`).
    pub stability_bound: Option<f64>,
}

impl FastRotationReport {
    /// CSV header of [`Self::csv_row`].
    pub const CSV_HEADER: &'static str =
        "alpha,omega,R,x0_x,x0_y,U_area,U_cells,h,pairing,pairing_boundary,omega_c,omega_alpha,verdict,oscillation,area,sym_diff_unit_disk,stability_bound\n";

    /// One CSV row.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.6e},{:.12e},{:.12e},{:.12e},{:.12e},{:?},{:.6e},{:.12e},{:.6e},{}\n",
            self.alpha,
            self.omega,
            self.r,
            self.x0[0],
            self.x0[1],
            self.u_area,
            self.u_cells,
            self.h,
            self.pairing,
            self.pairing_boundary,
            self.omega_c,
            self.omega_alpha,
            self.verdict,
            self.stationarity_oscillation,
            self.area,
            self.disk_symmetric_difference,
            self.stability_bound.map_or("".into(), |b| format!("{b:.12e}"))
        )
    }

    /// Structured text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("alpha            {}\n", self.alpha));
        s.push_str(&format!("omega            {}\n", self.omega));
        s.push_str(&format!("R                {:.12e}\n", self.r));
        s.push_str(&format!("x0               ({:.12e}, {:.12e})\n", self.x0[0], self.x0[1]));
        s.push_str(&format!("|U|              {:.6e} ({} cells, h = {:.3e})\n", self.u_area, self.u_cells, self.h));
        s.push_str(&format!("pairing          {:.12e}\n", self.pairing));
        s.push_str(&format!("pairing (bdry)   {:.12e}\n", self.pairing_boundary));
        s.push_str(&format!("omega_c(R)       {:.12e}\n", self.omega_c));
        s.push_str(&format!("omega_alpha      {:.12e}\n", self.omega_alpha));
        s.push_str(&format!("verdict          {:?}\n", self.verdict));
        s.push_str(&format!("oscillation      {:.6e}\n", self.stationarity_oscillation));
        s.push_str(&format!("|D|              {:.12e}\n", self.area));
        s.push_str(&format!("|D △ B(0,1)|     {:.6e}\n", self.disk_symmetric_difference));
        if let Some(b) = self.stability_bound {
            s.push_str(&format!("stability bound  {b:.12e}\n"));
        }
        s
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("fast rotation needs 0 < alpha < 1 (Ω_α is infinite for α ≥ 1), got {alpha}")));
    }
    Ok(())
}

/// `|D △ B| ≤ 2π((Ω_α/Ω)^{2/α} − 1)` for rotating patches of area `π`.
pub fn stability_disk_bound(omega: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let oa = omega_alpha(alpha)?;
    if !(omega > 0.0 && omega < oa) {
        return Err(Error::Domain(format!("stability bound needs 0 < Ω < Ω_α = {oa}, got {omega}")));
    }
    Ok(2.0 * PI * ((oa / omega).powf(2.0 / alpha) - 1.0))
}

/// Fast-rotation test of a simply-connected patch with the default raster
/// (256 cells across `B(0,R)`).
pub fn fast_rotation_test(patch: &Patch, alpha: f64, omega: f64) -> Result<FastRotationReport> {
    fast_rotation_test_with(patch, alpha, omega, 256, DEFAULT_BOUNDARY_NODES)
}

/// Fast-rotation test with explicit raster size and boundary resolution.
pub fn fast_rotation_test_with(patch: &Patch, alpha: f64, omega: f64, grid_n: usize, boundary_nodes: usize) -> Result<FastRotationReport> {
    check_alpha(alpha)?;
    let patch = patch.normalized()?;
    let shape = match patch.components.as_slice() {
        [s] if s.hole_count() == 0 => s,
        _ => return Err(Error::Domain("fast rotation test needs a simply-connected patch (one component, no holes)".into())),
    };
    let kernel = KernelSpec::new(alpha)?;
    let outer = shape
        .boundary(boundary_nodes)
        .into_iter()
        .find(|c| !c.is_hole)
        .ok_or_else(|| Error::DegenerateGeometry("patch has no outer boundary".into()))?;
    let x0 = outer.farthest_from_origin();
    let r = x0[0].hypot(x0[1]);

    // U = B(0,R) ∖ D on a raster over the disk.
    let grid = Grid::covering((-r, -r, r, r), grid_n.max(8));
    let u = Raster::from_fn(grid, |p| p[0].hypot(p[1]) < r && !patch.contains(p));
    let u_cells = u.count();
    let field = ScalarField { grid, values: u.cells.iter().map(|&c| f64::from(u8::from(c))).collect() };
    let g = Convolver::for_field(&field, kernel).gradient(x0);
    let pairing = g[0] * x0[0] + g[1] * x0[1];

    // ∇(1_B * K)(x₀)·x₀ = −C_α I′(R) R for the disk; minus the patch term.
    let disk_term = -c_alpha(alpha)? * disk_riesz_radial_derivative(r, alpha, r)? * r;
    let gd = Convolver::for_indicator(&patch, kernel, boundary_nodes)?.gradient(x0);
    let pairing_boundary = disk_term - (gd[0] * x0[0] + gd[1] * x0[1]);

    let oc = omega_c(r, alpha)?;
    let verdict = if u_cells == 0 {
        FastRotationVerdict::Disk
    } else if omega >= oc {
        FastRotationVerdict::InconsistentWithRotation
    } else {
        FastRotationVerdict::BelowThreshold
    };
    let state = RotatingState::patch(patch.clone(), omega, kernel)?.with_boundary_nodes(boundary_nodes);
    let oscillation = max_oscillation(&stationarity_residual(&state)?);
    let area = crate::geometry::measures(&patch)?.area;
    let unit = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.0 });
    let oa = omega_alpha(alpha)?;
    Ok(FastRotationReport {
        alpha,
        omega,
        r,
        x0,
        u_area: u.area(),
        u_cells,
        h: grid.h,
        pairing,
        pairing_boundary,
        omega_c: oc,
        omega_alpha: oa,
        verdict,
        stationarity_oscillation: oscillation,
        area,
        disk_symmetric_difference: symmetric_difference(&patch, &unit)?,
        stability_bound: (omega > 0.0 && omega < oa).then(|| stability_disk_bound(omega, alpha)).transpose()?,
    })
}

/// Seeded unit disk with one to three smooth inward dents (polygon with
/// `n` vertices): `r(θ) = 1 − Σ d_k cos²(π(θ − θ_k)/(2w_k))` on
/// `|θ − θ_k| < w_k`, depths in `[0.05, 0.3]`, half-widths in
/// `[0.15, 0.6]` (ChaCha8 generator).
pub fn dented_disk(seed: u64, n: usize) -> Patch {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=3);
    let dents: Vec<(f64, f64, f64)> =
        (0..k).map(|_| (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.15..0.6), rng.gen_range(0.05..0.3))).collect();
    let outer = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let mut r = 1.0;
            for &(c, w, d) in &dents {
                let dt = (t - c + PI).rem_euclid(2.0 * PI) - PI;
                if dt.abs() < w {
                    r -= d * (0.5 * PI * dt / w).cos().powi(2);
                }
            }
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    Patch::single(Shape::Polygon { outer, holes: vec![] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_has_empty_complement_and_zero_pairing() {
        let p = Patch::single(Shape::Disk { center: [0.0, 0.0], radius: 1.3 });
        let r = fast_rotation_test_with(&p, 0.5, 0.4, 128, 256).unwrap();
        assert_eq!(r.verdict, FastRotationVerdict::Disk);
        assert_eq!(r.pairing, 0.0);
        assert!(r.pairing_boundary.abs() < 1e-6, "{}", r.pairing_boundary);
        assert!((r.r - 1.3).abs() < 1e-12);
    }

    #[test]
    fn dented_disk_pairing_is_positive() {
        let p = dented_disk(7, 512);
        let r = fast_rotation_test_with(&p, 0.5, 0.1, 128, 512).unwrap();
        assert!(r.u_cells > 0 && r.pairing > 0.0 && r.pairing_boundary > 0.0, "{r:?}");
        assert!((r.pairing / r.pairing_boundary - 1.0).abs() < 0.1, "{} vs {}", r.pairing, r.pairing_boundary);
        assert_eq!(r.verdict, FastRotationVerdict::BelowThreshold);
    }

    #[test]
    fn stability_bound_exponent_arithmetic() {
        for alpha in [0.2, 0.5, 0.9] {
            let oa = omega_alpha(alpha).unwrap();
            let b = stability_disk_bound(oa / 2f64.powf(alpha), alpha).unwrap();
            assert!((b - 6.0 * PI).abs() < 1e-10, "{b}");
        }
        assert!(stability_disk_bound(0.0, 0.5).is_err());
        assert!(stability_disk_bound(omega_alpha(0.5).unwrap(), 0.5).is_err());
        assert!(stability_disk_bound(0.1, 1.0).is_err());
    }

    #[test]
    fn area_pi_patch_above_threshold_is_inconsistent() {
        let p = dented_disk(3, 512);
        let area = crate::geometry::measures(&p).unwrap().area;
        let p = p.scaled((PI / area).sqrt());
        let oa = omega_alpha(0.5).unwrap();
        let r = fast_rotation_test_with(&p, 0.5, 1.1 * oa, 128, 512).unwrap();
        assert!(r.r >= 1.0 && r.u_cells > 0);
        assert_eq!(r.verdict, FastRotationVerdict::InconsistentWithRotation);
        assert!(r.stability_bound.is_none());
    }

    #[test]
    fn verdict_is_scale_covariant() {
        let p = dented_disk(11, 512);
        let oc = omega_c(1.0, 0.5).unwrap();
        for (omega, lambda) in [(0.5 * oc, 1.7), (1.2 * oc, 0.6), (0.9 * oc, 1.3)] {
            let a = fast_rotation_test_with(&p, 0.5, omega, 128, 512).unwrap();
            let b = fast_rotation_test_with(&p.scaled(lambda), 0.5, lambda.powf(-0.5) * omega, 128, 512).unwrap();
            assert_eq!(a.verdict, b.verdict);
        }
    }

    #[test]
    fn stability_bound_at_gamma_value() {
        let oa = omega_alpha(0.5).unwrap();
        let b = stability_disk_bound(0.8, 0.5).unwrap();
        assert!((b - 2.0 * PI * ((oa / 0.8).powi(4) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn alpha_outside_unit_interval_is_rejected() {
        let p = dented_disk(1, 128);
        assert!(fast_rotation_test(&p, 1.0, 0.5).is_err());
        assert!(fast_rotation_test(&p, 0.0, 0.5).is_err());
    }
}
