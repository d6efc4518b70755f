//! Kernels, special functions and the explicit angular-velocity thresholds.
//!
//! The kernel family is `K_0(x) = (1/2π) ln|x|` (Newtonian) and
//! `K_α(x) = −C_α |x|^{−α}` for `0 < α < 2`, with
//! `C_α = (1/2π) Γ(α/2) / (2^{1−α} Γ(1 − α/2))`.  Every kernel of the family
//! is radially increasing.
//!
//! The threshold formulas are
//!
//! ```text
//! Ω_m^α = 2^{α−1} Γ(1−α)/Γ(1−α/2)² · (Γ(1+α/2)/Γ(2−α/2) − Γ(m+α/2)/Γ(m+1−α/2))
//! Ω_α   = 2^{α−1} Γ(1−α) Γ(1+α/2) / (Γ(1−α/2)² Γ(2−α/2))       (= +∞ for α ≥ 1)
//! Ω_c(R) = R^{−α} Ω_α
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of terms of a hypergeometric series.
pub const HYP_MAX_TERMS: usize = 1_000_000;

/// Returns `Γ(x)`.
///
/// Evaluation is delegated to the Lanczos approximation of `statrs`
/// (relative error below 1e-13 on `[0.1, 30]`, see the unit tests).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma of non-finite value {x}")));
    }
    if x <= 0.0 && x == x.round() {
        return Err(Error::Pole(x));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// Returns `1/Γ(x)`, which is entire (zero at the non-positive integers).
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        0.0
    } else {
        1.0 / statrs::function::gamma::gamma(x)
    }
}

/// Returns `Γ(x)/Γ(y)` for positive arguments, switching to log-Gamma when
/// the individual factors would overflow.
pub fn gamma_ratio(x: f64, y: f64) -> f64 {
    if x < 150.0 && y < 150.0 {
        statrs::function::gamma::gamma(x) / statrs::function::gamma::gamma(y)
    } else {
        (statrs::function::gamma::ln_gamma(x) - statrs::function::gamma::ln_gamma(y)).exp()
    }
}

/// Direct power series of the Gauss hypergeometric function `₂F₁(a,b;c;z)`
/// for `0 ≤ z ≤ 1`, truncated once a term drops below `1e-16` of the partial
/// sum.  At `z = 1` convergence requires `c − a − b > 0` and is algebraic.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("hyp2f1 series needs z in [0,1], got {z}")));
    }
    if c <= 0.0 && c == c.round() {
        return Err(Error::Domain(format!("hyp2f1 with non-positive integer c = {c}")));
    }
    if z == 1.0 && c - a - b <= 0.0 {
        return Err(Error::Domain("hyp2f1 diverges at z = 1 when c − a − b ≤ 0".into()));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..HYP_MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 || term.abs() < 1e-16 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence(format!(
        "hyp2f1({a},{b};{c};{z}) exceeded {HYP_MAX_TERMS} terms"
    )))
}

/// Gauss hypergeometric function `₂F₁(a,b;c;z)` for `0 ≤ z ≤ 1`.
///
/// For `z ≤ 1/2` the direct series is used.  For `z > 1/2` the series is
/// slow (algebraic decay of the terms near `z = 1`), so the standard
/// connection formula to `1 − z` is applied when `c − a − b` is not an
/// integer; otherwise the direct series is used.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let s = c - a - b;
    if z <= 0.5 || (s - s.round()).abs() < 1e-12 {
        return hyp2f1_series(a, b, c, z);
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("hyp2f1 needs z in [0,1], got {z}")));
    }
    let w = 1.0 - z;
    let gc = gamma_fn(c)?;
    let first = gc * gamma_fn(s)? * recip_gamma(c - a) * recip_gamma(c - b);
    let second = gc * gamma_fn(-s)? * recip_gamma(a) * recip_gamma(b);
    let mut total = 0.0;
    if first != 0.0 {
        total += first * hyp2f1_series(a, b, 1.0 - s, w)?;
    }
    if second != 0.0 && w > 0.0 {
        total += second * w.powf(s) * hyp2f1_series(c - a, c - b, 1.0 + s, w)?;
    }
    Ok(total)
}

/// Kernel constant `C_α` of the Riesz kernel, `0 < α < 2`.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("C_alpha needs 0 < alpha < 2, got {alpha}")));
    }
    Ok(gamma_fn(alpha / 2.0)? / (2f64.powf(1.0 - alpha) * gamma_fn(1.0 - alpha / 2.0)?)
        / (2.0 * PI))
}

/// The interaction kernel `K_α`, `0 ≤ α < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// Kernel exponent; `0` denotes the Newtonian kernel.
    pub alpha: f64,
    /// Kernel constant `C_α` (`1/2π` stored for the Newtonian kernel).
    pub c_alpha: f64,
}

impl KernelSpec {
    /// Builds the kernel for `0 ≤ alpha < 2`.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&alpha) {
            return Err(Error::Domain(format!("kernel needs 0 ≤ alpha < 2, got {alpha}")));
        }
        if alpha == 0.0 {
            Ok(Self::newtonian())
        } else {
            Ok(Self { alpha, c_alpha: c_alpha(alpha)? })
        }
    }

    /// The Newtonian kernel `(1/2π) ln|x|`.
    pub fn newtonian() -> Self {
        Self { alpha: 0.0, c_alpha: 1.0 / (2.0 * PI) }
    }

    /// True for the logarithmic kernel.
    pub fn is_newtonian(&self) -> bool {
        self.alpha == 0.0
    }

    /// Kernel value at distance `r > 0` (unchecked hot-path version).
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        if self.alpha == 0.0 {
            r.ln() / (2.0 * PI)
        } else {
            -self.c_alpha * r.powf(-self.alpha)
        }
    }

    /// Radial derivative `K'(r)` (unchecked hot-path version).
    #[inline]
    pub fn eval_derivative(&self, r: f64) -> f64 {
        if self.alpha == 0.0 {
            1.0 / (2.0 * PI * r)
        } else {
            self.alpha * self.c_alpha * r.powf(-self.alpha - 1.0)
        }
    }

    /// The function `k(r) = r^{−2} ∫_0^r s K(s) ds`, for which
    /// `div_y[(y − x) k(|y − x|)] = K(|y − x|)`.  It turns area integrals of the
    /// kernel into boundary integrals.
    #[inline]
    pub fn flux_profile(&self, r: f64) -> f64 {
        if self.alpha == 0.0 {
            (0.5 * r.ln() - 0.25) / (2.0 * PI)
        } else {
            -self.c_alpha * r.powf(-self.alpha) / (2.0 - self.alpha)
        }
    }

    /// The radial antiderivative `F(r) = ∫_0^r s K(s) ds`.
    #[inline]
    pub fn radial_primitive(&self, r: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else {
            r * r * self.flux_profile(r)
        }
    }

    /// Exponent `δ` of the hypothesis `K'(r) ≲ r^{−d−1+δ}` in dimension 2,
    /// recorded for reporting fitted exponents.
    pub fn holder_delta(&self) -> f64 {
        2.0 - self.alpha
    }
}

/// Kernel value with the domain check `r > 0`.
pub fn kernel_value(k: &KernelSpec, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("kernel evaluated at r = {r}")));
    }
    Ok(k.eval(r))
}

/// Radial kernel derivative with the domain check `r > 0`.
pub fn kernel_radial_derivative(k: &KernelSpec, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("kernel derivative evaluated at r = {r}")));
    }
    Ok(k.eval_derivative(r))
}

/// Bifurcation angular velocity `Ω_m^α` from the disk, `m ≥ 2`.
///
/// Valid for `0 ≤ α < 2`, `α ≠ 1` (the factor `Γ(1 − α)` has a pole at 1).
pub fn omega_m_alpha(m: u32, alpha: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("omega_m_alpha needs m ≥ 2, got {m}")));
    }
    if !(0.0..2.0).contains(&alpha) {
        return Err(Error::Domain(format!("omega_m_alpha needs 0 ≤ alpha < 2, got {alpha}")));
    }
    let pref = 2f64.powf(alpha - 1.0) * gamma_fn(1.0 - alpha)? / gamma_fn(1.0 - alpha / 2.0)?.powi(2);
    let mf = m as f64;
    let head = gamma_ratio(1.0 + alpha / 2.0, 2.0 - alpha / 2.0);
    let tail = gamma_ratio(mf + alpha / 2.0, mf + 1.0 - alpha / 2.0);
    Ok(pref * (head - tail))
}

/// The limit `Ω_α = lim_m Ω_m^α` for `0 < α < 1`; `+∞` for `1 ≤ α < 2`.
pub fn omega_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("omega_alpha needs 0 < alpha < 1, got {alpha}")));
    }
    if alpha >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2f64.powf(alpha - 1.0) * gamma_fn(1.0 - alpha)? * gamma_fn(1.0 + alpha / 2.0)?
        / (gamma_fn(1.0 - alpha / 2.0)?.powi(2) * gamma_fn(2.0 - alpha / 2.0)?))
}

/// Sharp fast-rotation threshold `Ω_c(R) = R^{−α} Ω_α`.
pub fn omega_c(r: f64, alpha: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("omega_c needs R > 0, got {r}")));
    }
    Ok(r.powf(-alpha) * omega_alpha(alpha)?)
}

/// Table of bifurcation thresholds for one kernel exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdTable {
    /// Kernel exponent.
    pub alpha: f64,
    /// `(m, Ω_m^α)` for `m = 2..=m_max`.
    pub omega_m: Vec<(u32, f64)>,
    /// `Ω_α` (`+∞` for α ≥ 1, `1/2` at α = 0).
    pub omega_alpha: f64,
    /// `(R, Ω_c(R))` for the queried radii.
    pub omega_c: Vec<(f64, f64)>,
}

impl ThresholdTable {
    /// Builds the table for `m = 2..=m_max` and the given radii.
    pub fn build(alpha: f64, m_max: u32, radii: &[f64]) -> Result<Self> {
        let omega_m = (2..=m_max)
            .map(|m| omega_m_alpha(m, alpha).map(|w| (m, w)))
            .collect::<Result<Vec<_>>>()?;
        let oa = if alpha == 0.0 { 0.5 } else { omega_alpha(alpha)? };
        let omega_c = radii.iter().map(|&r| (r, r.powf(-alpha) * oa)).collect();
        Ok(Self { alpha, omega_m, omega_alpha: oa, omega_c })
    }

    /// CSV with columns `alpha,m,omega_m,omega_alpha,R,omega_c`; rows with an
    /// empty `m` carry the per-radius thresholds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,m,omega_m,omega_alpha,R,omega_c\n");
        for (m, w) in &self.omega_m {
            out += &format!("{},{},{:.16e},{:.16e},,\n", self.alpha, m, w, self.omega_alpha);
        }
        for (r, w) in &self.omega_c {
            out += &format!("{},,,{:.16e},{},{:.16e}\n", self.alpha, self.omega_alpha, r, w);
        }
        out
    }
}

fn check_disk_args(r_disk: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("disk Riesz potential needs 0 < alpha < 1, got {alpha}")));
    }
    if !(r_disk > 0.0) {
        return Err(Error::Domain(format!("disk radius must be positive, got {r_disk}")));
    }
    Ok(())
}

/// `I(s) = ∫_{B(0,R)} |x − y|^{−α} dy` at `|x| = s`.
///
/// Interior: `2πR^{2−α}/(2−α) · ₂F₁(α/2 − 1, α/2; 1; s²/R²)`;
/// exterior: `πR² s^{−α} · ₂F₁(α/2, α/2; 2; R²/s²)`.  The normalization is the
/// one of the defining integral (value `2πR^{2−α}/(2−α)` at the center).
pub fn disk_riesz_radial(r_disk: f64, alpha: f64, s: f64) -> Result<f64> {
    check_disk_args(r_disk, alpha)?;
    disk_riesz_radial_any(r_disk, alpha, s)
}

/// The same closed form for any `0 < α < 2` (both series still converge at
/// `z = 1` since `c − a − b = 2 − α > 0`); used for benchmarks of the more
/// singular kernels.
pub(crate) fn disk_riesz_radial_any(r_disk: f64, alpha: f64, s: f64) -> Result<f64> {
    let s = s.abs();
    let b = alpha / 2.0;
    if s <= r_disk {
        let z = (s / r_disk).powi(2);
        Ok(2.0 * PI * r_disk.powf(2.0 - alpha) / (2.0 - alpha) * hyp2f1(b - 1.0, b, 1.0, z)?)
    } else {
        let w = (r_disk / s).powi(2);
        Ok(PI * r_disk * r_disk * s.powf(-alpha) * hyp2f1(b, b, 2.0, w)?)
    }
}

/// `I(x) = ∫_{B(0,R)} |x − y|^{−α} dy` at the point `x`.
pub fn disk_riesz_potential(r_disk: f64, alpha: f64, x: [f64; 2]) -> Result<f64> {
    disk_riesz_radial(r_disk, alpha, x[0].hypot(x[1]))
}

/// Exact radial derivative `dI/ds`, obtained by differentiating the
/// hypergeometric representations term by term.
pub fn disk_riesz_radial_derivative(r_disk: f64, alpha: f64, s: f64) -> Result<f64> {
    check_disk_args(r_disk, alpha)?;
    let b = alpha / 2.0;
    if s <= r_disk {
        let z = (s / r_disk).powi(2);
        let amp = 2.0 * PI * r_disk.powf(2.0 - alpha) / (2.0 - alpha);
        Ok(amp * (b - 1.0) * b * hyp2f1(b, b + 1.0, 2.0, z)? * 2.0 * s / (r_disk * r_disk))
    } else {
        let w = (r_disk / s).powi(2);
        let f0 = hyp2f1(b, b, 2.0, w)?;
        let f1 = hyp2f1(b + 1.0, b + 1.0, 3.0, w)?;
        let r2 = r_disk * r_disk;
        Ok(PI * r2
            * (-alpha * s.powf(-alpha - 1.0) * f0
                + s.powf(-alpha) * (b * b / 2.0) * f1 * (-2.0 * r2 / s.powi(3))))
    }
}

/// Finite-difference estimate of `dI/ds` at `s = R⁻`.
///
/// Near the boundary `I(R − t) = I(R) − I'(R) t + c t^{2−α} + d t² + …`, so
/// one-sided quotients are combined by Richardson extrapolation on the
/// exponent sequence `1 − α, 1, 2 − α, 2` (step halving from `R/20`).
pub fn disk_riesz_boundary_derivative_fd(r_disk: f64, alpha: f64) -> Result<f64> {
    check_disk_args(r_disk, alpha)?;
    let i_r = disk_riesz_radial(r_disk, alpha, r_disk)?;
    let h0 = 0.05 * r_disk;
    let mut table = (0..5)
        .map(|k| {
            let h = h0 / 2f64.powi(k);
            disk_riesz_radial(r_disk, alpha, r_disk - h).map(|v| (i_r - v) / h)
        })
        .collect::<Result<Vec<_>>>()?;
    for p in [1.0 - alpha, 1.0, 2.0 - alpha, 2.0] {
        let f = 2f64.powf(p);
        table = table.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
    }
    Ok(table[0])
}

/// Outcome of the radial monotonicity test of `1_{B(0,R)} * K_α − (Ω/2)|x|²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfileReport {
    /// True when the radial derivative is `≤ tolerance` on the whole grid.
    pub is_monotone: bool,
    /// Radius where the derivative is largest.
    pub worst_location: f64,
    /// Largest sampled radial derivative.
    pub worst_derivative: f64,
    /// Absolute tolerance applied to the derivative.
    pub tolerance: f64,
}

/// Samples `d/ds [−C_α I(s) − (Ω/2) s²]` on `(0, 3R]` (including `s = R`).
pub fn radial_profile_check(r_disk: f64, alpha: f64, omega: f64) -> Result<RadialProfileReport> {
    check_disk_args(r_disk, alpha)?;
    let c = c_alpha(alpha)?;
    let n = 3000;
    let scale = c * disk_riesz_radial_derivative(r_disk, alpha, r_disk)?.abs() + omega.abs() * r_disk;
    let tolerance = 1e-10 * scale;
    let mut worst = (f64::NEG_INFINITY, 0.0);
    let mut grid: Vec<f64> = (1..=n).map(|i| 3.0 * r_disk * i as f64 / n as f64).collect();
    grid.push(r_disk);
    for s in grid {
        let d = -c * disk_riesz_radial_derivative(r_disk, alpha, s)? - omega * s;
        if d > worst.0 {
            worst = (d, s);
        }
    }
    Ok(RadialProfileReport {
        is_monotone: worst.0 <= tolerance,
        worst_location: worst.1,
        worst_derivative: worst.0,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_reference_values() {
        assert!(rel(gamma_fn(0.5).unwrap(), PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(5.0).unwrap(), 24.0) < 1e-14);
        // Γ(1/4) to 40 digits from an arbitrary-precision evaluation.
        assert!(rel(gamma_fn(0.25).unwrap(), 3.625_609_908_221_908_3) < 1e-13);
        let refl = gamma_fn(0.25).unwrap() * gamma_fn(0.75).unwrap();
        assert!(rel(refl, PI / (PI / 4.0).sin()) < 1e-13);
        let mut fact = 1.0;
        for n in 1..29u32 {
            fact *= n as f64;
            assert!(rel(gamma_fn(n as f64 + 1.0).unwrap(), fact) < 1e-12, "n = {n}");
        }
        assert!(matches!(gamma_fn(0.0), Err(Error::Pole(_))));
        assert!(matches!(gamma_fn(-3.0), Err(Error::Pole(_))));
    }

    #[test]
    fn kernel_values() {
        let k0 = KernelSpec::new(0.0).unwrap();
        assert_eq!(kernel_value(&k0, 1.0).unwrap(), 0.0);
        let k1 = KernelSpec::new(1.0).unwrap();
        assert!(rel(kernel_value(&k1, 1.0).unwrap(), -1.0 / (2.0 * PI)) < 1e-14);
        for a in [0.0, 0.25, 0.5, 1.0, 1.5, 1.9] {
            let k = KernelSpec::new(a).unwrap();
            assert!(kernel_radial_derivative(&k, 1.0).unwrap() > 0.0);
        }
        assert!(kernel_value(&k0, 0.0).is_err());
        assert!(KernelSpec::new(2.0).is_err());
        // C_{1/2} from an arbitrary-precision evaluation.
        assert!(rel(c_alpha(0.5).unwrap(), 0.332_967_935_501_700_26) < 1e-13);
    }

    #[test]
    fn flux_profile_is_consistent() {
        for a in [0.0, 0.5, 1.3] {
            let k = KernelSpec::new(a).unwrap();
            let r = 0.7;
            let h = 1e-5;
            // d/dr (r² k(r)) = r K(r)
            let d = ((r + h) * (r + h) * k.flux_profile(r + h) - (r - h) * (r - h) * k.flux_profile(r - h))
                / (2.0 * h);
            assert!((d - r * k.eval(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn hyp2f1_transformation_matches_series() {
        for &(a, b, c) in &[(-0.75, 0.25, 1.0), (0.25, 0.25, 2.0), (0.375, 1.375, 2.0)] {
            for z in [0.55, 0.7, 0.9] {
                let s = hyp2f1_series(a, b, c, z).unwrap();
                let t = hyp2f1(a, b, c, z).unwrap();
                assert!(rel(t, s) < 1e-12, "{a} {b} {c} {z}: {t} vs {s}");
            }
        }
        // Gauss summation at z = 1.
        let (a, b, c) = (0.25, 0.25, 2.0);
        let gauss = gamma_fn(c).unwrap() * gamma_fn(c - a - b).unwrap()
            / (gamma_fn(c - a).unwrap() * gamma_fn(c - b).unwrap());
        assert!(rel(hyp2f1(a, b, c, 1.0).unwrap(), gauss) < 1e-13);
    }

    #[test]
    fn thresholds_reference_values() {
        for m in 2..=50 {
            let w = omega_m_alpha(m, 0.0).unwrap();
            assert!((w - (m as f64 - 1.0) / (2.0 * m as f64)).abs() < 1e-12);
        }
        // Arbitrary-precision oracle values.
        assert!((omega_m_alpha(2, 0.5).unwrap() - 0.235_179_968_596_959_59).abs() < 1e-12);
        assert!((omega_m_alpha(3, 0.25).unwrap() - 0.337_329_057_873_984_77).abs() < 1e-12);
        assert!((omega_alpha(0.5).unwrap() - 0.823_129_890_089_358_58).abs() < 1e-12);
        assert!((omega_alpha(0.75).unwrap() - 1.468_873_237_239_363_5).abs() < 1e-11);
        assert!((omega_alpha(1e-8).unwrap() - 0.5).abs() < 1e-6);
        assert!(omega_alpha(1.0).unwrap().is_infinite());
        assert!(omega_alpha(0.0).is_err());
        assert!(matches!(omega_m_alpha(2, 1.0), Err(Error::Pole(_))));
        let r = omega_c(2.0, 0.5).unwrap() / omega_c(1.0, 0.5).unwrap();
        assert!((r - 2f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn disk_potential_reference_values() {
        let a = 0.5;
        assert!(rel(disk_riesz_radial(1.0, a, 0.0).unwrap(), 2.0 * PI / 1.5) < 1e-14);
        // Exterior value at |x| = 2 from an arbitrary-precision oracle.
        assert!(rel(disk_riesz_radial(1.0, a, 2.0).unwrap(), 2.240_064_105_185_437_9) < 1e-13);
        let inner = disk_riesz_radial(1.0, a, 1.0).unwrap();
        let outer = disk_riesz_radial(1.0, a, 1.0 + 1e-14).unwrap();
        assert!(rel(inner, 3.296_132_759_646_883_4) < 1e-13);
        assert!(rel(outer, inner) < 1e-8);
        let far = 1e4;
        assert!(rel(disk_riesz_radial(1.0, a, far).unwrap() * far.powf(a), PI) < 1e-7);
    }

    #[test]
    fn boundary_derivative_matches_threshold_relation() {
        for a in [0.25, 0.5, 0.75] {
            for r in [0.5, 1.0, 2.0] {
                let pred = -r / c_alpha(a).unwrap() * omega_c(r, a).unwrap();
                let exact = disk_riesz_radial_derivative(r, a, r).unwrap();
                let fd = disk_riesz_boundary_derivative_fd(r, a).unwrap();
                assert!(rel(exact, pred) < 1e-10, "{a} {r}");
                assert!(rel(fd, pred) < 1e-4, "{a} {r}: {fd} vs {pred}");
            }
        }
    }

    #[test]
    fn radial_profile_threshold_is_sharp() {
        for a in [0.25, 0.5, 0.75] {
            let wc = omega_c(1.0, a).unwrap();
            assert!(radial_profile_check(1.0, a, wc).unwrap().is_monotone);
            assert!(radial_profile_check(1.0, a, 1.01 * wc).unwrap().is_monotone);
            let bad = radial_profile_check(1.0, a, 0.9 * wc).unwrap();
            assert!(!bad.is_monotone);
            assert!((bad.worst_location - 1.0).abs() < 0.01);
        }
    }
}
