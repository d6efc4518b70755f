//! Acceptance report: one PASS/FAIL line per criterion, followed by the
//! measured quantities.  The binary always exits 0 so that the report is
//! produced in full; a criterion that cannot be evaluated (an error) is
//! reported as FAIL and makes the process exit 1.

use std::f64::consts::PI;
use std::time::Instant;

use patchlab::geometry::{measures, random_star_polygon, Patch, Shape};
use patchlab::maxprin::{dented_disk, fast_rotation_test, stability_disk_bound};
use patchlab::poisson::{
    eccentric_annulus_bound, mobius_b, sign_pattern_violation, solve_constrained, talenti_report, thin_annulus_bound,
    PoissonOptions, PoissonSolution,
};
use patchlab::potential::{max_oscillation, stationarity_residual, RotatingState};
use patchlab::special::{
    c_alpha, disk_riesz_boundary_derivative_fd, omega_alpha, omega_c, omega_m_alpha, radial_profile_check, KernelSpec,
};
use patchlab::steiner::{default_tau_grid, random_blob_raster, trace_with, Confinement, InteractionOperator, Rho, RowSet};
use patchlab::variation::{exterior_first_variation, VariationContext, VariationOptions};
use patchlab::Result;

type Outcome = Result<(bool, String)>;

fn disk(c: [f64; 2], r: f64) -> Patch {
    Patch::single(Shape::Disk { center: c, radius: r })
}

fn annulus() -> Patch {
    Patch::single(Shape::Annulus { center: [0.0, 0.0], r_inner: 0.5, r_outer: 1.0 })
}

fn kirchhoff() -> Patch {
    Patch::single(Shape::Ellipse { center: [0.0, 0.0], a: 2.0, b: 1.0, angle: 0.0 })
}

fn ellipse() -> Patch {
    Patch::single(Shape::Ellipse { center: [0.2, -0.1], a: 1.5, b: 0.8, angle: 0.4 })
}

fn square() -> Patch {
    Patch::single(Shape::Polygon { outer: vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]], holes: vec![] })
}

fn newtonian_context(p: &Patch, opts: VariationOptions) -> Result<VariationContext> {
    VariationContext::new(&RotatingState::patch(p.clone(), 0.0, KernelSpec::newtonian())?, opts)
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let osc = |omega: f64| -> Result<f64> {
        let s = RotatingState::patch(kirchhoff(), omega, KernelSpec::newtonian())?.with_boundary_nodes(512);
        Ok(max_oscillation(&stationarity_residual(&s)?))
    };
    let (rot, off) = (osc(2.0 / 9.0)?, osc(0.3)?);
    let secs = t.elapsed().as_secs_f64();
    let pass = rot <= 1e-3 * off && secs < 30.0;
    Ok((pass, format!("osc(2/9) = {rot:.3e}, osc(0.3) = {off:.3e}, ratio {:.3e}, {secs:.2} s, 512 nodes", rot / off)))
}

/// Poisson solutions of the disk, annulus, square and ellipse, shared by
/// criteria 2 and 3.
struct Shapes {
    contexts: Vec<(&'static str, Patch, VariationContext)>,
}

fn shapes() -> Result<Shapes> {
    let list = [("disk", disk([0.0, 0.0], 1.0)), ("annulus", annulus()), ("ellipse", ellipse()), ("square", square())];
    let contexts = list
        .into_iter()
        .map(|(n, p)| newtonian_context(&p, VariationOptions::default()).map(|c| (n, p, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Shapes { contexts })
}

fn criterion_2(sh: &Shapes) -> Outcome {
    let mut pass = true;
    let mut msg = Vec::new();
    for (name, _, ctx) in &sh.contexts {
        for omega in [0.0, 0.3, 0.5] {
            let r = ctx.report(omega);
            let gap = r.two_path_gap().unwrap_or(f64::INFINITY);
            pass &= gap <= r.tol;
            if omega == 0.3 {
                msg.push(format!("{name} gap {gap:.2e}/{:.2e}", r.tol));
            }
        }
    }
    let k = newtonian_context(&kirchhoff(), VariationOptions { quadrature: false, ..Default::default() })?;
    let omega = 2.0 / 9.0;
    let r = k.report(omega);
    let t = r.terms.clone().ok_or_else(|| patchlab::Error::Domain("no closed form".into()))?;
    let (a, b) = (2.0f64, 1.0f64);
    let int_p = PI * a.powi(3) * b.powi(3) / (2.0 * (a * a + b * b));
    let int_x2 = PI * a * b * (a * a + b * b) / 4.0;
    let i = r.i_identity.unwrap_or(f64::NAN);
    let ep = (t.p_term / (2.0 * omega - 1.0) - int_p).abs();
    let em = (t.moment_term / omega - int_x2).abs();
    pass &= i.abs() <= r.tol && ep <= r.tol && em <= r.tol;
    msg.push(format!("Kirchhoff I = {i:.2e} (tol {:.2e}), |int p - oracle| {ep:.2e}, |int x^2 - oracle| {em:.2e}", r.tol));
    Ok((pass, msg.join("; ")))
}

fn solution<'a>(sh: &'a Shapes, name: &str) -> &'a PoissonSolution {
    &sh.contexts.iter().find(|c| c.0 == name).map(|c| &c.2).expect("shape").solutions()[0]
}

fn criterion_3(sh: &Shapes) -> Outcome {
    let n = PoissonOptions::default().boundary_nodes;
    let d = solution(sh, "disk");
    let mut pass = (d.sup_p() - 0.5).abs() <= 1e-3 && (d.integral_p() - PI / 4.0).abs() <= 1e-3;
    let mut msg = vec![format!("disk sup {:.6} int {:.6}", d.sup_p(), d.integral_p())];
    let a = solution(sh, "annulus");
    let (es, ei) = ((a.sup_p() - a.area / (2.0 * PI)).abs(), (a.integral_p() - a.area * a.area / (4.0 * PI)).abs());
    pass &= es <= 1e-3 && ei <= 1e-3;
    msg.push(format!("annulus equality errors {es:.2e}, {ei:.2e}"));
    for name in ["square", "ellipse"] {
        let t = talenti_report(solution(sh, name), n)?;
        pass &= t.gap_sup > t.tol_sup && t.gap_int > t.tol_int;
        msg.push(format!("{name} gaps {:.3e} > {:.1e}, {:.3e} > {:.1e}", t.gap_sup, t.tol_sup, t.gap_int, t.tol_int));
    }
    Ok((pass, msg.join("; ")))
}

/// Ten connected test shapes with two to four polygonal holes.
fn multi_hole_shapes() -> Vec<Patch> {
    (0..10)
        .map(|s| {
            let k = 2 + s % 3;
            let half = 2.0 + 0.1 * s as f64;
            let outer = vec![[-half, -half], [half, -half], [half, half], [-half, half]];
            let holes = (0..k)
                .map(|j| {
                    let phi = 2.0 * PI * j as f64 / k as f64 + 0.3 * s as f64;
                    let (cx, cy) = ((1.0 + 0.05 * j as f64) * phi.cos(), (1.0 + 0.05 * j as f64) * phi.sin());
                    let (r, sides) = (0.25 + 0.05 * ((s + j) % 4) as f64, 3 + (s + j) % 5);
                    (0..sides)
                        .map(|v| {
                            let t = 2.0 * PI * v as f64 / sides as f64 + 0.1 * j as f64;
                            [cx + r * t.cos(), cy + r * t.sin()]
                        })
                        .collect()
                })
                .collect();
            Patch::single(Shape::Polygon { outer, holes })
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let (mut worst_flux, mut min_c, mut holes) = (0.0f64, f64::INFINITY, 0);
    for p in multi_hole_shapes() {
        let s = solve_constrained(&p)?;
        for ((f, area), c) in s.hole_fluxes.iter().zip(&s.hole_areas).zip(&s.hole_constants) {
            worst_flux = worst_flux.max((f + 2.0 * area).abs() / (2.0 * area));
            min_c = min_c.min(*c);
            holes += 1;
        }
        if let Some(v) = sign_pattern_violation(&s.matrix) {
            pass = false;
            println!("    sign pattern: {v}");
        }
    }
    pass &= worst_flux <= 1e-3 && min_c > 0.0;
    Ok((pass, format!("10 shapes, {holes} holes: worst relative flux error {worst_flux:.2e}, min c_i {min_c:.4e}")))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut msg = Vec::new();
    for (a, eps) in [(0.5, 1e-3), (0.9, 1e-2)] {
        let hb = thin_annulus_bound(a, eps)?;
        let b = mobius_b(a, eps)?;
        let s = (2.0 + (1.0 - a * a) * eps) / a;
        let res = (b * b - s * b + 1.0).abs();
        pass &= hb.pass && res <= 1e-12 && a / 2.0 < b && b < a;
        msg.push(format!("thin({a},{eps}) c1 {:.6} <= {:.6}, b {b:.6} residual {res:.1e}", hb.c1, hb.bound));
    }
    for (r, big_r, l) in [(1.0, 2.0, 0.5), (1.0, 2.0, 0.9)] {
        let hb = eccentric_annulus_bound(r, big_r, l)?;
        pass &= hb.pass;
        msg.push(format!("eccentric l={l} c1 {:.6} <= {:.6}", hb.c1, hb.bound));
    }
    Ok((pass, msg.join("; ")))
}

fn criterion_6() -> Outcome {
    let mut worst_m = 0.0f64;
    for m in 2..=50u32 {
        worst_m = worst_m.max((omega_m_alpha(m, 0.0)? - (m as f64 - 1.0) / (2.0 * m as f64)).abs());
    }
    let small = (omega_alpha(1e-6)? - 0.5).abs();
    // High-precision Gamma evaluation (40 digits) of Ω_{1/2}.
    let reference = 0.823_129_890_089_358_575_514_f64;
    let half = (omega_alpha(0.5)? - reference).abs();
    let mut exact = true;
    for alpha in [0.1, 0.25, 0.5, 0.75, 0.9] {
        for r in [0.3, 1.0, 2.0, 7.5] {
            exact &= omega_c(r, alpha)? == f64::powf(r, -alpha) * omega_alpha(alpha)?;
        }
    }
    let pass = worst_m <= 1e-10 && small < 1e-5 && half <= 1e-8 && exact;
    Ok((pass, format!("max |Omega_m^0 - (m-1)/2m| {worst_m:.1e}; |Omega_(1e-6) - 1/2| {small:.1e}; |Omega_0.5 - ref| {half:.1e}; R^-a scaling exact: {exact}")))
}

fn criterion_7() -> Outcome {
    let (mut worst, mut pass) = (0.0f64, true);
    for alpha in [0.25, 0.5, 0.75] {
        for r in [0.5, 1.0, 2.0] {
            let fd = disk_riesz_boundary_derivative_fd(r, alpha)?;
            let closed = -f64::powf(r, 1.0 - alpha) * omega_alpha(alpha)? / c_alpha(alpha)?;
            worst = worst.max(((fd - closed) / closed).abs());
            let oc = omega_c(r, alpha)?;
            pass &= radial_profile_check(r, alpha, oc)?.is_monotone && !radial_profile_check(r, alpha, 0.9 * oc)?.is_monotone;
        }
    }
    pass &= worst <= 1e-4;
    Ok((pass, format!("worst relative derivative error {worst:.2e}; monotone at Omega_c, not at 0.9 Omega_c: {pass}")))
}

fn criterion_8() -> Outcome {
    let (mut drift, mut viol, mut cont) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut moment_ok = true;
    let mut nonsym = 0;
    for seed in 0..20u64 {
        let r = random_blob_raster(seed, 256);
        let s = RowSet::from_raster(&r);
        let rho = Rho::Set(s.clone());
        let taus = default_tau_grid(r.grid.h, rho.diameter(), 8);
        for alpha in [0.0, 0.5, 1.0] {
            let op = InteractionOperator::new(rho.grid(), KernelSpec::new(alpha)?)?;
            let tr = trace_with(&rho, &op, 0.0, Confinement::Quadratic, &taus)?;
            drift = drift.max(tr.mass_drift());
            viol = viol.max(tr.interaction_violation());
        }
        if !s.is_steiner_symmetric(1e-12) {
            nonsym += 1;
            moment_ok &= s.symmetrized(taus[0]).second_moment() < s.second_moment();
        }
        for &t in &taus {
            cont = cont.max(s.containment_excess(&s.symmetrized(t), t));
        }
    }
    let pass = drift <= 0.01 && viol <= 0.0 && moment_ok && cont <= 0.0;
    Ok((
        pass,
        format!(
            "20 rasters 256^2 x alpha {{0, 0.5, 1}}: mass drift {drift:.1e}, I increase beyond tol {viol:.2e}, moment decreasing on {nonsym} non-symmetric: {moment_ok}, containment excess {cont:.2e}"
        ),
    ))
}

fn criterion_9() -> Outcome {
    let opts = VariationOptions { poisson: PoissonOptions { boundary_nodes: 256, edge_target: None }, quadrature: false };
    let (mut pass, mut min_pos, mut max_neg) = (true, f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..20u64 {
        let ctx = newtonian_context(&random_star_polygon(seed, 256), opts)?;
        let (r0, r5) = (ctx.report(0.0), ctx.report(0.5));
        let (i0, i5) = (r0.i_identity.unwrap_or(f64::NAN), r5.i_identity.unwrap_or(f64::NAN));
        pass &= i0 > r0.tol && i5 < -r5.tol;
        min_pos = min_pos.min(i0 / r0.tol);
        max_neg = max_neg.max(i5 / r5.tol);
    }
    let off = newtonian_context(&disk([0.6, 0.3], 1.0), VariationOptions { quadrature: false, ..Default::default() })?;
    let r = off.report(-0.5);
    let i = r.i_identity.unwrap_or(f64::NAN);
    pass &= i > r.tol;
    Ok((pass, format!("20 star polygons (256 nodes): min I/tol at Omega=0 {min_pos:.1}, max I/tol at Omega=1/2 {max_neg:.1}; off-centre disk at Omega=-1/2: I/tol {:.1}", i / r.tol)))
}

fn criterion_10() -> Outcome {
    let p = annulus();
    let r0 = measures(&p)?.r_max;
    let reps = [4.0, 8.0, 16.0].iter().map(|m| exterior_first_variation(&p, 0.5, m * r0)).collect::<Result<Vec<_>>>()?;
    let grad = reps.iter().all(|r| r.outer_gradient_pass);
    let decay = reps[2].i_r.abs() < 0.25 * reps[0].i_r.abs();
    let scale = measures(&p)?.area.powi(2) / (4.0 * PI);
    let vals: Vec<String> = reps.iter().map(|r| format!("R={}: |I_R| {:.2e}, grad {:.2e} <= {:.2e}", r.r, r.i_r.abs(), r.outer_gradient_max, r.outer_gradient_bound)).collect();
    Ok((
        decay && grad,
        format!(
            "{}; |I_R| relative to |D|^2/4pi stays below {:.1e} (I_R vanishes identically for the centred annulus; the values are floating-point roundoff, which grows with R)",
            vals.join("; "),
            reps.iter().map(|r| r.i_r.abs()).fold(0.0, f64::max) / scale
        ),
    ))
}

fn criterion_11() -> Outcome {
    let (mut pass, mut min_pair) = (true, f64::INFINITY);
    for seed in 0..20u64 {
        let r = fast_rotation_test(&dented_disk(seed, 512), 0.5, 0.1)?;
        pass &= r.u_cells > 0 && r.pairing > 0.0 && r.pairing_boundary > 0.0;
        min_pair = min_pair.min(r.pairing.min(r.pairing_boundary));
    }
    let mut mono = true;
    for alpha in [0.25, 0.5, 0.75] {
        let oa = omega_alpha(alpha)?;
        let b = (1..=10).map(|k| stability_disk_bound(oa * (1.0 - 0.5f64.powi(k)), alpha)).collect::<Result<Vec<_>>>()?;
        mono &= b.windows(2).all(|w| w[1] < w[0]) && b.iter().all(|&v| v > 0.0) && b[9] < 1e-2 * b[0];
    }
    pass &= mono;
    Ok((pass, format!("20 dented disks: min pairing {min_pair:.3e}; stability bound decreasing to 0 at 10 points: {mono}")))
}

fn main() {
    let start = Instant::now();
    let mut errors = 0;
    let mut report = |n: usize, name: &str, r: Outcome| match r {
        Ok((pass, detail)) => println!("{} criterion {n:>2} ({name}): {detail}", if pass { "PASS" } else { "FAIL" }),
        Err(e) => {
            errors += 1;
            println!("FAIL criterion {n:>2} ({name}): error: {e}");
        }
    };
    report(1, "Kirchhoff consistency", criterion_1());
    match shapes() {
        Ok(sh) => {
            report(2, "two-path first variation", criterion_2(&sh));
            report(3, "Talenti equalities and gaps", criterion_3(&sh));
        }
        Err(e) => {
            report(2, "two-path first variation", Err(patchlab::Error::Domain(e.to_string())));
            report(3, "Talenti equalities and gaps", Err(e));
        }
    }
    report(4, "constrained solve", criterion_4());
    report(5, "quantitative hole lemmas", criterion_5());
    report(6, "thresholds", criterion_6());
    report(7, "radial derivative", criterion_7());
    report(8, "Steiner suite", criterion_8());
    report(9, "sign laws", criterion_9());
    report(10, "exterior experiment", criterion_10());
    report(11, "fast rotation", criterion_11());
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if errors > 0 {
        std::process::exit(1);
    }
}
