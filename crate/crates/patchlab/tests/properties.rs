//! Property tests of the geometric, special-function and symmetrization
//! invariants.

use std::f64::consts::PI;

use patchlab::geometry::{
    boundary_band, fraenkel_asymmetry, measures, random_star_polygon, sections, IntervalSet, Patch, Shape,
};
use patchlab::potential::{field_benchmark_error, ScalarField};
use patchlab::geometry::Grid;
use patchlab::special::{disk_riesz_radial, omega_alpha, omega_c, omega_m_alpha, radial_profile_check};
use patchlab::steiner::{msym_1d, random_blob_raster, ssym_density, RowSet};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn band_area_is_at_most_twice_perimeter_times_width(seed in 0u64..1000, k in 0usize..6) {
        let p = random_star_polygon(seed, 96);
        let tau = 1e-3 * 3f64.powi(k as i32);
        let per = measures(&p).unwrap().perimeter;
        let band = boundary_band(&p, tau).unwrap();
        prop_assert!(band.band_area <= 2.0 * per * tau * (1.0 + 1e-12), "{} > {}", band.band_area, 2.0 * per * tau);
    }

    #[test]
    fn sections_satisfy_fubini(seed in 0u64..1000, angle in 0.0f64..PI, k in 0usize..3) {
        let p = random_star_polygon(seed, 128);
        let h = 0.05 / 2f64.powi(k as i32);
        let m = measures(&p).unwrap();
        let total: f64 = sections(&p, [angle.cos(), angle.sin()], h).unwrap().iter().map(|s| h * s.set.total_length()).sum();
        prop_assert!((total - m.area).abs() <= 2.0 * h * m.perimeter, "{total} vs {}", m.area);
    }

    #[test]
    fn threshold_radius_scaling_is_exact(r in 0.1f64..10.0, lambda in 0.1f64..10.0, alpha in 0.01f64..0.99) {
        let a = omega_c(lambda * r, alpha).unwrap();
        let b = lambda.powf(-alpha) * omega_c(r, alpha).unwrap();
        prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn msym_preserves_dyadic_lengths_exactly(
        raw in prop::collection::vec((-64i32..64, 1i32..16), 1..6),
        t in 0i32..256,
    ) {
        let ivs: Vec<(f64, f64)> = raw.iter().map(|&(a, l)| (a as f64 / 32.0, (a + l) as f64 / 32.0)).collect();
        let u = IntervalSet::from_unsorted(ivs);
        let v = msym_1d(&u, t as f64 / 64.0);
        prop_assert_eq!(v.total_length(), u.total_length());
    }

    #[test]
    fn steiner_flow_conserves_raster_area(seed in 0u64..500, frac in 0.0f64..1.0) {
        let r = random_blob_raster(seed, 96);
        let s = RowSet::from_raster(&r);
        let tau = frac * 1.5;
        let moved = s.symmetrized(tau);
        let rows = r.grid.ny as f64;
        let h2 = r.grid.h * r.grid.h;
        prop_assert!((moved.area() - s.area()).abs() <= rows * h2);
        prop_assert!((moved.to_raster().area() - s.area()).abs() <= rows * h2);
        prop_assert!(s.containment_excess(&moved, tau) <= 0.0);
    }

    #[test]
    fn density_flow_respects_the_displacement_bound(cx in -0.5f64..0.5, cy in -0.5f64..0.5, tau in 0.0f64..1.0) {
        let grid = Grid::covering((-1.5, -1.5, 1.5, 1.5), 64);
        let f = ScalarField::from_fn(grid, |p| {
            let r2 = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / 0.36;
            if r2 < 1.0 { (1.0 - r2).powi(2) } else { 0.0 }
        });
        let d = ssym_density(&f, tau, 24).unwrap();
        prop_assert!(d.sup_displacement <= d.displacement_bound, "{} > {}", d.sup_displacement, d.displacement_bound);
        // The flow moves layers rigidly: mass equals that of the unmoved layering.
        let m0 = ssym_density(&f, 0.0, 24).unwrap().mass_out;
        prop_assert!((d.mass_out - m0).abs() <= 1e-12 * m0);
        prop_assert!(d.relative_mass_drift() <= 0.5 / 24.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(config(10))]

    #[test]
    fn asymmetry_is_invariant_under_rigid_motions(theta in 0.0f64..(2.0 * PI), tx in -2.0f64..2.0, ty in -2.0f64..2.0) {
        let e = Patch::single(Shape::Ellipse { center: [0.0, 0.0], a: 1.6, b: 0.7, angle: 0.0 });
        let a0 = fraenkel_asymmetry(&e).unwrap();
        let a1 = fraenkel_asymmetry(&e.transformed(theta, [tx, ty])).unwrap();
        prop_assert!((a0 - a1).abs() <= 1e-6, "{a0} vs {a1}");
    }
}

#[test]
fn bifurcation_thresholds_increase_to_their_limit() {
    for alpha in [0.0, 0.25, 0.5, 0.75] {
        let w: Vec<f64> = (2..=50).map(|m| omega_m_alpha(m, alpha).unwrap()).collect();
        assert!(w.windows(2).all(|p| p[1] > p[0]), "alpha {alpha}");
        let limit = if alpha == 0.0 { 0.5 } else { omega_alpha(alpha).unwrap() };
        let err: Vec<f64> = w.iter().map(|v| (v - limit).abs()).collect();
        assert!(err[48] < err[8], "alpha {alpha}: {} {}", err[8], err[48]);
        assert!(err.windows(2).all(|p| p[1] < p[0]), "alpha {alpha}");
    }
}

#[test]
fn disk_riesz_integral_decreases_radially() {
    for alpha in [0.1, 0.5, 0.9] {
        let v: Vec<f64> = (0..=60).map(|k| disk_riesz_radial(1.0, alpha, 0.05 * k as f64).unwrap()).collect();
        assert!(v.windows(2).all(|p| p[1] < p[0]), "alpha {alpha}");
    }
}

#[test]
fn radial_profile_is_monotone_above_the_threshold() {
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let oc = omega_c(r, alpha).unwrap();
            for f in [1.0, 1.5, 4.0] {
                assert!(radial_profile_check(r, alpha, f * oc).unwrap().is_monotone, "alpha {alpha} R {r} x{f}");
            }
        }
    }
}

#[test]
fn cell_quadrature_converges_at_first_order_or_better() {
    let errs: Vec<f64> = [32usize, 64, 128]
        .iter()
        .map(|&n| field_benchmark_error(Grid::covering((-1.0, -1.0, 1.0, 1.0), n)))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.0, "{errs:?}");
    }
}
