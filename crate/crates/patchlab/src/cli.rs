//! Command-line front end: argument parsing, input files, report emission.
//!
//! Every command writes one report into the output directory (`--out`, else
//! the `PATCHLAB_OUT_DIR` environment variable, else `patchlab-out`) and
//! echoes it on standard output.  Exit status: `0` when the command's
//! checks pass, `2` when one fails, `1` on errors.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::geometry::{measures, Patch, Shape, DEFAULT_BOUNDARY_NODES};
use crate::maxprin::{dented_disk, fast_rotation_test_with, FastRotationReport, FastRotationVerdict};
use crate::poisson::{
    asymmetry_hole_bound, disk_benchmark, distribution_function, eccentric_annulus_bound, solve_constrained_with,
    talenti_report, talenti_to_csv, thin_annulus_bound, HoleBound, PoissonOptions,
};
use crate::potential::{
    disk_benchmark_error, field_tolerance, max_oscillation, residual_tolerance, residuals_to_csv, smooth_residual,
    stationarity_residual, RotatingState, ScalarField,
};
use crate::special::{KernelSpec, ThresholdTable};
use crate::steiner::{default_tau_grid, energy_derivative_fd, random_blob_raster, Confinement, LayeredDensity, Rho};
use crate::variation::{
    decay_exponent, exterior_first_variation_with, fmt, rigidity_verdict, stability_bound, term_table, ExteriorOptions,
    ExteriorReport, VariationContext, VariationOptions, VariationReport,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PATCHLAB_OUT_DIR";

const KIRCHHOFF_ELLIPSE: &str = include_str!("../data/kirchhoff_ellipse.json");
const SQUARE: &str = include_str!("../data/square.json");
const ANNULUS: &str = include_str!("../data/annulus.json");

/// Report format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Comma-separated values with a header line.
    Csv,
    /// Structured text.
    Txt,
}

/// Which quantitative hole lemma `bounds` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    /// Thin eccentric annulus `B(aε e₁, 1 + ε) ∖ B(0, 1)`.
    Thin,
    /// Eccentric annulus `B(0, R) ∖ B(l e₁, r)`.
    Eccentric,
    /// Hole constant against the Fraenkel asymmetry of a one-hole patch.
    Asymmetry,
}

/// Parsed command line.
#[derive(Debug, Clone, Parser)]
#[command(name = "patchlab", version, about = "Rigidity experiments for rotating vortex patches")]
pub struct RunConfig {
    /// Command to run.
    #[command(subcommand)]
    pub command: Command,
    /// Patch file (JSON); `@kirchhoff`, `@square` and `@annulus` name the
    /// bundled files.
    #[arg(long, global = true)]
    pub patch: Option<String>,
    /// Sampled density file (JSON header line + little-endian f64 samples).
    #[arg(long, global = true)]
    pub density: Option<PathBuf>,
    /// Kernel exponent α ∈ [0, 2); 0 is the Newtonian kernel.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub alpha: f64,
    /// Angular velocity Ω (for `verify` on a lone ellipse the Kirchhoff
    /// value ab/(a+b)² is the default; otherwise 0).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Raster cells across the domain (steiner, fastrot).
    #[arg(long, global = true, default_value_t = 256)]
    pub grid: usize,
    /// Boundary nodes per curve (potentials and meshes).
    #[arg(long, global = true, default_value_t = DEFAULT_BOUNDARY_NODES)]
    pub boundary_nodes: usize,
    /// Explicit mesh edge length (overrides the boundary-node rule).
    #[arg(long, global = true)]
    pub edge_target: Option<f64>,
    /// Level count for sampled densities.
    #[arg(long, global = true, default_value_t = 16)]
    pub levels: usize,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "patchlab-out")]
    pub out: PathBuf,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Txt)]
    pub format: Format,
    /// Seed of the generated inputs.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
}

/// Commands.
#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Oscillation of f_Ω on the boundary (patch) or on level sets (density).
    Verify,
    /// First variation two ways, rigidity verdict and stability estimate.
    Variation,
    /// Exterior functional on B_R ∖ D over a grid of truncation radii.
    Exterior {
        /// Truncation radii as multiples of R₀ = max|x| over D.
        #[arg(long, value_delimiter = ',', default_values_t = vec![4.0, 8.0, 16.0])]
        radii: Vec<f64>,
    },
    /// Constrained torsion solve, Talenti gaps and distribution function.
    Poisson,
    /// Quantitative hole-constant lemmas.
    Bounds {
        /// Which lemma.
        #[arg(long, value_enum, default_value_t = BoundKind::Thin)]
        kind: BoundKind,
        /// Eccentricity fraction a of the thin annulus.
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        /// Thickness ε of the thin annulus.
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Hole radius r of the eccentric annulus.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// Outer radius R of the eccentric annulus.
        #[arg(long, default_value_t = 2.0)]
        big_r: f64,
        /// Hole offset l of the eccentric annulus.
        #[arg(long, default_value_t = 0.5)]
        l: f64,
    },
    /// Continuous Steiner symmetrization trace and energy derivative.
    Steiner {
        /// Number of flow times.
        #[arg(long, default_value_t = 12)]
        taus: usize,
        /// Confinement exponent p of g = |x|^p (default |x|²/2).
        #[arg(long)]
        power: Option<f64>,
    },
    /// Angular-velocity thresholds.
    Thresholds {
        /// Largest symmetry m.
        #[arg(long, default_value_t = 10)]
        m_max: u32,
        /// Radii R of Ω_c(R).
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0])]
        radii: Vec<f64>,
    },
    /// Fast-rotation rigidity test and disk stability bound.
    Fastrot,
    /// Resolution-convergence study on closed-form oracles.
    Bench,
}

/// Result of one command.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Whether every check of the command passed.
    pub pass: bool,
    /// The report (also written to `path`).
    pub report: String,
    /// File the report was written to.
    pub path: PathBuf,
}

/// Parses `args` (program name first), runs, prints, and returns the exit
/// status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(o) => {
            print!("{}", o.report);
            println!("{} -> {}", if o.pass { "PASS" } else { "FAIL" }, o.path.display());
            if o.pass {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs one command and writes its report.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    validate(cfg)?;
    let (name, (pass, report)) = match &cfg.command {
        Command::Verify => ("verify", verify(cfg)?),
        Command::Variation => ("variation", variation(cfg)?),
        Command::Exterior { radii } => ("exterior", exterior(cfg, radii)?),
        Command::Poisson => ("poisson", poisson(cfg)?),
        Command::Bounds { kind, a, eps, r, big_r, l } => ("bounds", bounds(cfg, *kind, *a, *eps, *r, *big_r, *l)?),
        Command::Steiner { taus, power } => ("steiner", steiner(cfg, *taus, *power)?),
        Command::Thresholds { m_max, radii } => ("thresholds", thresholds(cfg, *m_max, radii)?),
        Command::Fastrot => ("fastrot", fastrot(cfg)?),
        Command::Bench => ("bench", bench(cfg)?),
    };
    std::fs::create_dir_all(&cfg.out)?;
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Txt => "txt",
    };
    let path = cfg.out.join(format!("{name}.{ext}"));
    std::fs::write(&path, &report)?;
    Ok(Outcome { pass, report, path })
}

fn validate(cfg: &RunConfig) -> Result<()> {
    if !(0.0..2.0).contains(&cfg.alpha) {
        return Err(Error::Domain(format!("--alpha must lie in [0, 2), got {}", cfg.alpha)));
    }
    for (flag, v) in [("--grid", cfg.grid), ("--boundary-nodes", cfg.boundary_nodes), ("--levels", cfg.levels)] {
        if v == 0 {
            return Err(Error::Domain(format!("{flag} must be positive")));
        }
    }
    if let Some(h) = cfg.edge_target {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("--edge-target must be positive, got {h}")));
        }
    }
    if let Some(w) = cfg.omega {
        if !w.is_finite() {
            return Err(Error::Domain("--omega must be finite".into()));
        }
    }
    Ok(())
}

/// Reads a patch file, resolving the bundled names.
pub fn load_patch(spec: &str) -> Result<Patch> {
    let text = match spec {
        "@kirchhoff" => KIRCHHOFF_ELLIPSE.to_string(),
        "@square" => SQUARE.to_string(),
        "@annulus" => ANNULUS.to_string(),
        path => std::fs::read_to_string(path).map_err(|e| Error::Format(format!("--patch {path}: {e}")))?,
    };
    Patch::from_json(&text).map_err(|e| Error::Format(format!("--patch {spec}: {e}")))
}

fn load_density(path: &Path) -> Result<ScalarField> {
    let f = std::fs::File::open(path).map_err(|e| Error::Format(format!("--density {}: {e}", path.display())))?;
    ScalarField::read_from(std::io::BufReader::new(f)).map_err(|e| Error::Format(format!("--density {}: {e}", path.display())))
}

fn required_patch(cfg: &RunConfig) -> Result<Patch> {
    cfg.patch
        .as_deref()
        .map(load_patch)
        .unwrap_or_else(|| Err(Error::Domain("this command needs --patch FILE".into())))
}

fn kernel(cfg: &RunConfig) -> Result<KernelSpec> {
    KernelSpec::new(cfg.alpha)
}

fn poisson_options(cfg: &RunConfig) -> PoissonOptions {
    PoissonOptions { boundary_nodes: cfg.boundary_nodes, edge_target: cfg.edge_target }
}

/// Appends constant columns to every line of a CSV table.
fn with_columns(csv: &str, cols: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, line) in csv.lines().enumerate() {
        out.push_str(line);
        for (name, value) in cols {
            out.push(',');
            out.push_str(if k == 0 { name } else { value });
        }
        out.push('\n');
    }
    out
}

fn pass_line(pass: bool) -> (String, String) {
    ("pass".into(), pass.to_string())
}

fn verify(cfg: &RunConfig) -> Result<(bool, String)> {
    let k = kernel(cfg)?;
    if let Some(path) = &cfg.density {
        let field = load_density(path)?;
        let omega = cfg.omega.unwrap_or(0.0);
        let grid = field.grid;
        let max = field.max();
        let levels: Vec<f64> = (1..=cfg.levels).map(|i| max * i as f64 / (cfg.levels + 1) as f64).collect();
        let state = RotatingState::smooth(field, omega, k)?;
        let (res, warnings) = smooth_residual(&state, &levels)?;
        let tol = field_tolerance(grid);
        let worst = res.iter().map(|r| r.oscillation).fold(0.0, f64::max);
        let pass = worst <= tol;
        let report = match cfg.format {
            Format::Csv => with_columns(
                &residuals_to_csv(&[], &res),
                &[("nx", grid.nx.to_string()), ("ny", grid.ny.to_string()), ("h", fmt(grid.h)), ("tol", fmt(tol))],
            ),
            Format::Txt => {
                let mut rows = vec![
                    ("Omega".into(), fmt(omega)),
                    ("alpha".into(), fmt(cfg.alpha)),
                    ("grid".into(), format!("{} x {}, h = {}", grid.nx, grid.ny, fmt(grid.h))),
                    ("levels".into(), levels.len().to_string()),
                    ("max oscillation".into(), fmt(worst)),
                    ("tol".into(), fmt(tol)),
                    pass_line(pass),
                ];
                rows.extend(warnings.into_iter().map(|w| ("warning".to_string(), w)));
                term_table("level-set stationarity", &rows)
            }
        };
        return Ok((pass, report));
    }
    let patch = required_patch(cfg)?;
    let omega = cfg.omega.unwrap_or_else(|| match patch.components.as_slice() {
        [Shape::Ellipse { a, b, .. }] if k.is_newtonian() => a * b / ((a + b) * (a + b)),
        _ => 0.0,
    });
    let state = RotatingState::patch(patch, omega, k)?.with_boundary_nodes(cfg.boundary_nodes);
    let res = stationarity_residual(&state)?;
    let tol = residual_tolerance(&k, cfg.boundary_nodes)?;
    let worst = max_oscillation(&res);
    let pass = worst <= tol;
    let report = match cfg.format {
        Format::Csv => with_columns(
            &residuals_to_csv(&res, &[]),
            &[
                ("boundary_nodes", cfg.boundary_nodes.to_string()),
                ("omega", fmt(omega)),
                ("alpha", fmt(cfg.alpha)),
                ("tol", fmt(tol)),
            ],
        ),
        Format::Txt => {
            let mut rows = vec![
                ("Omega".into(), fmt(omega)),
                ("alpha".into(), fmt(cfg.alpha)),
                ("boundary_nodes".into(), cfg.boundary_nodes.to_string()),
            ];
            for r in &res {
                rows.push((
                    format!("component {}{}", r.component_id, if r.is_hole { " (hole)" } else { "" }),
                    format!("C = {}, oscillation = {}", fmt(r.mean), fmt(r.oscillation)),
                ));
            }
            rows.push(("max oscillation".into(), fmt(worst)));
            rows.push(("tol".into(), fmt(tol)));
            rows.push(pass_line(pass));
            term_table("boundary stationarity", &rows)
        }
    };
    Ok((pass, report))
}

fn variation(cfg: &RunConfig) -> Result<(bool, String)> {
    let patch = required_patch(cfg)?;
    let omega = cfg.omega.unwrap_or(0.0);
    let state = RotatingState::patch(patch.clone(), omega, kernel(cfg)?)?.with_boundary_nodes(cfg.boundary_nodes);
    let ctx = VariationContext::new(&state, VariationOptions { poisson: poisson_options(cfg), quadrature: true })?;
    let rep: VariationReport = ctx.report(omega);
    let verdict = rigidity_verdict(&patch, &rep);
    let stab = stability_bound(&patch, omega).ok();
    let gap_ok = rep.two_path_gap().is_none_or(|g| g <= rep.tol);
    let pass = verdict.consistent && gap_ok;
    let report = match cfg.format {
        Format::Csv => {
            let mut s = String::from(VariationReport::CSV_HEADER.trim_end());
            s.push_str(",expected,observed,consistent,stability_bound,stability_measured\n");
            s.push_str(rep.csv_row().trim_end());
            let (b, m) = stab.as_ref().map_or((String::new(), String::new()), |s| (fmt(s.bound), fmt(s.measured)));
            let _ = writeln!(s, ",{:?},{},{},{b},{m}", verdict.expected, verdict.observed, verdict.consistent);
            s
        }
        Format::Txt => {
            let mut s = rep.to_text();
            let mut rows = vec![
                ("expected sign".to_string(), format!("{:?}", verdict.expected)),
                ("observed sign".into(), verdict.observed.to_string()),
                ("conclusion".into(), verdict.conclusion.clone()),
                ("two-path gap".into(), rep.two_path_gap().map_or("n/a".into(), fmt)),
            ];
            if let Some(st) = &stab {
                rows.push(("|D △ B| bound".into(), fmt(st.bound)));
                rows.push(("|D △ B| measured".into(), fmt(st.measured)));
                rows.push(("stationarity oscillation".into(), fmt(st.stationarity_oscillation)));
            }
            rows.push(pass_line(pass));
            s.push_str(&term_table("rigidity", &rows));
            s
        }
    };
    Ok((pass, report))
}

fn exterior(cfg: &RunConfig, radii: &[f64]) -> Result<(bool, String)> {
    let patch = required_patch(cfg)?;
    let omega = cfg.omega.unwrap_or(0.0);
    if !kernel(cfg)?.is_newtonian() {
        return Err(Error::Domain("the exterior functional is defined for the Newtonian kernel (--alpha 0)".into()));
    }
    let r0 = measures(&patch)?.r_max;
    let opts = ExteriorOptions { boundary_nodes: cfg.boundary_nodes, ..ExteriorOptions::default() };
    let reps = radii
        .iter()
        .map(|&m| exterior_first_variation_with(&patch, omega, m * r0, opts))
        .collect::<Result<Vec<ExteriorReport>>>()?;
    let pass = reps.iter().all(|r| r.outer_gradient_pass);
    let report = match cfg.format {
        Format::Csv => {
            let mut s = String::from(ExteriorReport::CSV_HEADER);
            reps.iter().for_each(|r| s.push_str(&r.csv_row()));
            with_columns(&s, &[("boundary_nodes", cfg.boundary_nodes.to_string())])
        }
        Format::Txt => {
            let mut rows = vec![
                ("Omega".to_string(), fmt(omega)),
                ("R0".into(), fmt(r0)),
                ("boundary_nodes".into(), cfg.boundary_nodes.to_string()),
            ];
            for r in &reps {
                rows.push((
                    format!("R = {}", fmt(r.r)),
                    format!(
                        "I_R = {}, J1 = {}, J2 = {}, grad max = {} <= {} ({}), edge = {}",
                        fmt(r.i_r),
                        fmt(r.j_r1),
                        fmt(r.j_r2),
                        fmt(r.outer_gradient_max),
                        fmt(r.outer_gradient_bound),
                        r.outer_gradient_pass,
                        fmt(r.edge_target)
                    ),
                ));
            }
            if reps.len() >= 2 {
                let rs: Vec<f64> = reps.iter().map(|r| r.r).collect();
                let ys: Vec<f64> = reps.iter().map(|r| r.i_r.abs().max(f64::MIN_POSITIVE)).collect();
                rows.push(("|I_R| decay exponent".into(), fmt(decay_exponent(&rs, &ys))));
            }
            rows.push(pass_line(pass));
            term_table("exterior functional", &rows)
        }
    };
    Ok((pass, report))
}

fn poisson(cfg: &RunConfig) -> Result<(bool, String)> {
    let patch = required_patch(cfg)?;
    let sol = solve_constrained_with(&patch, poisson_options(cfg))?;
    let tal = talenti_report(&sol, cfg.boundary_nodes)?;
    let df = distribution_function(&sol, None);
    let pass = tal.pass;
    let name = cfg.patch.clone().unwrap_or_default();
    let report = match cfg.format {
        Format::Csv => {
            let mut s = talenti_to_csv(&[(name, tal.clone())]);
            s.push_str("\nk,mu,area_minus_2pi_k,edge_target\n");
            for (k, g) in df.k.iter().zip(&df.g) {
                let _ = writeln!(s, "{},{},{},{}", fmt(*k), fmt(*g), fmt((df.area - 2.0 * PI * k).max(0.0)), fmt(tal.edge_target));
            }
            s
        }
        Format::Txt => {
            let mut rows = vec![
                ("edge_target".to_string(), fmt(tal.edge_target)),
                ("|D|".into(), fmt(sol.area)),
                ("sup p".into(), fmt(tal.sup_p)),
                ("|D|/2pi".into(), fmt(tal.bound_sup)),
                ("gap (sup)".into(), fmt(tal.gap_sup)),
                ("int p".into(), fmt(tal.int_p)),
                ("|D|^2/4pi".into(), fmt(tal.bound_int)),
                ("gap (int)".into(), fmt(tal.gap_int)),
                ("tol (sup, int)".into(), format!("{}, {}", fmt(tal.tol_sup), fmt(tal.tol_int))),
            ];
            for (i, (c, f)) in sol.hole_constants.iter().zip(&sol.hole_fluxes).enumerate() {
                rows.push((format!("hole {i}"), format!("c = {}, flux = {}, |h| = {}", fmt(*c), fmt(*f), fmt(sol.hole_areas[i]))));
            }
            rows.push(("mu(k) non-increasing".into(), df.is_non_increasing().to_string()));
            rows.push(("max mu(k) - (|D| - 2pi k)+".into(), fmt(df.bound_excess())));
            rows.push(pass_line(pass));
            term_table("constrained torsion", &rows)
        }
    };
    Ok((pass, report))
}

fn hole_bound_report(cfg: &RunConfig, title: &str, params: &[(&str, f64)], b: &HoleBound) -> String {
    match cfg.format {
        Format::Csv => {
            let mut s = String::new();
            let names: Vec<&str> = params.iter().map(|p| p.0).collect();
            let _ = writeln!(s, "{},c1,bound,concentric,tol,pass,edge_target", names.join(","));
            let vals: Vec<String> = params.iter().map(|p| fmt(p.1)).collect();
            let _ = writeln!(s, "{},{},{},{},{},{},{}", vals.join(","), fmt(b.c1), fmt(b.bound), fmt(b.concentric), fmt(b.tol), b.pass, fmt(b.edge_target));
            s
        }
        Format::Txt => {
            let mut rows: Vec<(String, String)> = params.iter().map(|(k, v)| (k.to_string(), fmt(*v))).collect();
            rows.push(("c1".into(), fmt(b.c1)));
            rows.push(("bound".into(), fmt(b.bound)));
            rows.push(("concentric |D|/2pi".into(), fmt(b.concentric)));
            rows.push(("tol".into(), fmt(b.tol)));
            rows.push(("edge_target".into(), fmt(b.edge_target)));
            rows.push(pass_line(b.pass));
            term_table(title, &rows)
        }
    }
}

fn bounds(cfg: &RunConfig, kind: BoundKind, a: f64, eps: f64, r: f64, big_r: f64, l: f64) -> Result<(bool, String)> {
    Ok(match kind {
        BoundKind::Thin => {
            let b = thin_annulus_bound(a, eps)?;
            (b.pass, hole_bound_report(cfg, "thin annulus hole constant", &[("a", a), ("eps", eps)], &b))
        }
        BoundKind::Eccentric => {
            let b = eccentric_annulus_bound(r, big_r, l)?;
            (b.pass, hole_bound_report(cfg, "eccentric annulus hole constant", &[("r", r), ("R", big_r), ("l", l)], &b))
        }
        BoundKind::Asymmetry => {
            let patch = required_patch(cfg)?;
            let rep = asymmetry_hole_bound(&patch)?;
            let report = match cfg.format {
                Format::Csv => format!(
                    "ratio,asymmetry_filled,asymmetry_floor,distribution_excess,pass,boundary_nodes\n{},{},{},{},{},{}\n",
                    fmt(rep.ratio),
                    fmt(rep.asymmetry_filled),
                    fmt(rep.asymmetry_floor),
                    fmt(rep.distribution_excess),
                    rep.pass,
                    DEFAULT_BOUNDARY_NODES
                ),
                Format::Txt => term_table(
                    "hole constant versus asymmetry",
                    &[
                        ("c1 / (|D|/2pi)".into(), fmt(rep.ratio)),
                        ("asymmetry of filled patch".into(), fmt(rep.asymmetry_filled)),
                        ("asymmetry floor".into(), fmt(rep.asymmetry_floor)),
                        ("distribution excess".into(), fmt(rep.distribution_excess)),
                        ("boundary_nodes".into(), DEFAULT_BOUNDARY_NODES.to_string()),
                        pass_line(rep.pass),
                    ],
                ),
            };
            (rep.pass, report)
        }
    })
}

fn steiner(cfg: &RunConfig, n_taus: usize, power: Option<f64>) -> Result<(bool, String)> {
    let k = kernel(cfg)?;
    let omega = cfg.omega.unwrap_or(0.0);
    let g = match power {
        Some(p) => Confinement::Power(p),
        None => Confinement::Quadratic,
    };
    g.validate()?;
    let (rho, source) = if let Some(path) = &cfg.density {
        (Rho::Density(LayeredDensity::new(&load_density(path)?, cfg.levels)?), format!("density {}", path.display()))
    } else {
        let (patch, source) = match &cfg.patch {
            Some(p) => (load_patch(p)?, format!("patch {p}")),
            None => (Patch::single(Shape::Raster(random_blob_raster(cfg.seed, cfg.grid))), format!("random blobs, seed {}", cfg.seed)),
        };
        let (x0, y0, x1, y1) = patch.bbox();
        let h = (x1 - x0).max(y1 - y0) / cfg.grid as f64;
        (Rho::from_patch(&patch, h)?, source)
    };
    let grid = rho.grid();
    let taus = default_tau_grid(grid.h, rho.diameter(), n_taus.max(2));
    let d = energy_derivative_fd(&rho, k, omega, g, &taus)?;
    let drift = d.trace.mass_drift();
    let pass = d.interaction_non_increasing && drift <= 0.01;
    let report = match cfg.format {
        Format::Csv => with_columns(&d.trace.to_csv(), &[("nx", grid.nx.to_string()), ("ny", grid.ny.to_string())]),
        Format::Txt => {
            let mut rows = vec![
                ("input".to_string(), source),
                ("alpha".into(), fmt(cfg.alpha)),
                ("Omega".into(), fmt(omega)),
                ("grid".into(), format!("{} x {}, h = {}", grid.nx, grid.ny, fmt(grid.h))),
            ];
            for r in &d.trace.rows {
                rows.push((
                    format!("tau = {:.4e}", r.tau),
                    format!("mass {}, I {}, E {}, |x|^2 {}, tol {:.3e}", fmt(r.area), fmt(r.interaction), fmt(r.energy), fmt(r.second_moment), r.quadrature_tol),
                ));
            }
            rows.push(("mass drift".into(), fmt(drift)));
            rows.push(("I violation beyond tol".into(), fmt(d.interaction_violation)));
            rows.push(("right derivative".into(), fmt(d.right_derivative)));
            rows.push(("translation jitter".into(), fmt(d.translation_jitter)));
            rows.push(("fitted exponent".into(), d.fitted_exponent.map_or("n/a".into(), fmt)));
            rows.push(("predicted exponent".into(), fmt(d.predicted_exponent)));
            rows.push(("strictly decreasing at start".into(), d.strictly_decreasing_at_start.to_string()));
            rows.extend(d.warnings.iter().map(|w| ("warning".to_string(), w.clone())));
            rows.push(pass_line(pass));
            term_table("continuous Steiner symmetrization", &rows)
        }
    };
    Ok((pass, report))
}

fn thresholds(cfg: &RunConfig, m_max: u32, radii: &[f64]) -> Result<(bool, String)> {
    let t = ThresholdTable::build(cfg.alpha, m_max, radii)?;
    let report = match cfg.format {
        Format::Csv => with_columns(&t.to_csv(), &[("resolution", "closed-form".into())]),
        Format::Txt => {
            let mut rows: Vec<(String, String)> = t.omega_m.iter().map(|(m, w)| (format!("Omega_{m}"), format!("{w:.16e}"))).collect();
            rows.push(("Omega_alpha".into(), format!("{:.16e}", t.omega_alpha)));
            rows.extend(t.omega_c.iter().map(|(r, w)| (format!("Omega_c(R = {r})"), format!("{w:.16e}"))));
            rows.push(("resolution".into(), "closed-form".into()));
            term_table(&format!("thresholds, alpha = {}", t.alpha), &rows)
        }
    };
    Ok((true, report))
}

fn fastrot(cfg: &RunConfig) -> Result<(bool, String)> {
    let patch = match &cfg.patch {
        Some(p) => load_patch(p)?,
        None => dented_disk(cfg.seed, cfg.boundary_nodes.max(64)),
    };
    let omega = cfg.omega.unwrap_or(0.0);
    let rep: FastRotationReport = fast_rotation_test_with(&patch, cfg.alpha, omega, cfg.grid, cfg.boundary_nodes)?;
    let pass = match rep.verdict {
        FastRotationVerdict::Disk => rep.pairing == 0.0,
        _ => rep.pairing > 0.0,
    };
    let report = match cfg.format {
        Format::Csv => {
            let mut s = String::from(FastRotationReport::CSV_HEADER);
            s.push_str(&rep.csv_row());
            with_columns(&s, &[("grid", cfg.grid.to_string()), ("boundary_nodes", cfg.boundary_nodes.to_string())])
        }
        Format::Txt => {
            let mut s = rep.to_text();
            let _ = writeln!(s, "grid             {}\nboundary_nodes   {}\npass             {pass}", cfg.grid, cfg.boundary_nodes);
            s
        }
    };
    Ok((pass, report))
}

/// Relative error of `value` against `exact`.
fn rel(value: f64, exact: f64) -> f64 {
    (value - exact).abs() / exact.abs()
}

fn bench(cfg: &RunConfig) -> Result<(bool, String)> {
    let levels: Vec<usize> = [64, 128, 256, 512, 1024].into_iter().filter(|&n| n <= cfg.boundary_nodes.max(64)).collect();
    let (a, b) = (2.0, 1.0);
    let ellipse = Patch::single(Shape::Ellipse { center: [0.0, 0.0], a, b, angle: 0.0 });
    let annulus = Patch::single(Shape::Annulus { center: [0.0, 0.0], r_inner: 0.5, r_outer: 1.0 });
    let ann_area = PI * 0.75;
    let riesz = KernelSpec::new(0.5)?;
    // (case, quantity) -> errors per resolution.
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    let mut push = |name: &str, e: f64| match series.iter_mut().find(|s| s.0 == name) {
        Some(s) => s.1.push(e),
        None => series.push((name.to_string(), vec![e])),
    };
    for &n in &levels {
        push("disk potential alpha=0 (abs)", disk_benchmark_error(&KernelSpec::newtonian(), n)?);
        push("disk potential alpha=0.5 (abs)", disk_benchmark_error(&riesz, n)?);
        let (es, ei) = disk_benchmark(n)?;
        push("disk sup p (rel)", es);
        push("disk int p (rel)", ei);
        let opts = PoissonOptions { boundary_nodes: n, edge_target: None };
        let s = solve_constrained_with(&annulus, opts)?;
        push("annulus sup p (rel)", rel(s.sup_p(), ann_area / (2.0 * PI)));
        push("annulus int p (rel)", rel(s.integral_p(), ann_area * ann_area / (4.0 * PI)));
        let s = solve_constrained_with(&ellipse, opts)?;
        push("ellipse int p (rel)", rel(s.integral_p(), PI * a.powi(3) * b.powi(3) / (2.0 * (a * a + b * b))));
        push("ellipse sup p (rel)", rel(s.sup_p(), a * a * b * b / (a * a + b * b)));
    }
    // Converging: the finest error is below the coarsest (or at roundoff).
    let converging = |e: &[f64]| e.last().copied().unwrap_or(0.0) <= e[0].max(1e-12);
    let pass = series.iter().all(|(_, e)| converging(e));
    let report = match cfg.format {
        Format::Csv => {
            let mut s = String::from("case,boundary_nodes,error\n");
            for (name, e) in &series {
                for (n, v) in levels.iter().zip(e) {
                    let _ = writeln!(s, "{name},{n},{}", fmt(*v));
                }
            }
            s
        }
        Format::Txt => {
            let rows: Vec<(String, String)> = series
                .iter()
                .map(|(name, e)| {
                    let cells: Vec<String> = levels.iter().zip(e).map(|(n, v)| format!("{n}: {v:.3e}")).collect();
                    (name.clone(), format!("{} [{}]", cells.join(", "), if converging(e) { "converging" } else { "NOT converging" }))
                })
                .collect();
            term_table("resolution study (boundary nodes: error)", &rows)
        }
    };
    Ok((pass, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_patches_parse() {
        for name in ["@kirchhoff", "@square", "@annulus"] {
            load_patch(name).unwrap();
        }
    }

    #[test]
    fn malformed_patch_names_the_field() {
        let dir = std::env::temp_dir().join(format!("patchlab-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("bad.json");
        std::fs::write(&p, r#"{"type": "disk", "center": [0, 0]}"#).unwrap();
        let e = load_patch(p.to_str().unwrap()).unwrap_err().to_string();
        assert!(e.contains("radius"), "{e}");
    }

    #[test]
    fn csv_columns_are_appended_to_every_line() {
        let s = with_columns("a,b\n1,2\n", &[("h", "0.5".into())]);
        assert_eq!(s, "a,b,h\n1,2,0.5\n");
    }

    #[test]
    fn unknown_command_is_an_error() {
        assert_eq!(main_with(["patchlab", "frobnicate"]), 1);
    }
}
