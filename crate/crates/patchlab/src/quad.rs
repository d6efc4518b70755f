//! One-dimensional quadrature rules and a small derivative-free minimizer.

use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    /// Nodes in `(0, 1)`.
    pub nodes: Vec<f64>,
    /// Positive weights summing to 1.
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Builds the `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = 0.5 * (1.0 - x);
            weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(a + len * x))
            .sum::<f64>()
            * len
    }
}

/// Cached 4-point rule.
pub fn gauss4() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(4))
}

/// Cached 8-point rule.
pub fn gauss8() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(8))
}

/// Cached 16-point rule.
pub fn gauss16() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(16))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * hw, ((k - g) * hw).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]` with an
/// absolute tolerance `tol`; bisection depth is capped at `max_depth`.
pub fn adaptive_gk(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn rec(
        f: &mut impl FnMut(f64) -> f64,
        a: f64,
        b: f64,
        whole: (f64, f64),
        tol: f64,
        depth: u32,
    ) -> f64 {
        if whole.1 <= tol || depth == 0 {
            return whole.0;
        }
        let m = 0.5 * (a + b);
        let l = gk15(a, m, f);
        let r = gk15(m, b, f);
        rec(f, a, m, l, 0.5 * tol, depth - 1) + rec(f, m, b, r, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let whole = gk15(a, b, &mut f);
    rec(&mut f, a, b, whole, tol, max_depth)
}

/// Nelder–Mead minimization in two variables.
///
/// Returns the best point and value after the simplex spread in function
/// value falls below `ftol` or `max_iter` iterations elapse.
pub fn nelder_mead_2d(
    mut f: impl FnMut([f64; 2]) -> f64,
    start: [f64; 2],
    step: f64,
    ftol: f64,
    max_iter: usize,
) -> ([f64; 2], f64) {
    let mut s = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut v = [f(s[0]), f(s[1]), f(s[2])];
    for _ in 0..max_iter {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = [s[idx[0]], s[idx[1]], s[idx[2]]];
        v = [v[idx[0]], v[idx[1]], v[idx[2]]];
        let size = (s[1][0] - s[0][0]).abs().max((s[1][1] - s[0][1]).abs())
            + (s[2][0] - s[0][0]).abs().max((s[2][1] - s[0][1]).abs());
        if (v[2] - v[0]).abs() <= ftol && size < 1e-9 * (1.0 + step) {
            break;
        }
        let c = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
        let at = |t: f64| [c[0] + t * (s[2][0] - c[0]), c[1] + t * (s[2][1] - c[1])];
        let xr = at(-1.0);
        let fr = f(xr);
        if fr < v[0] {
            let xe = at(-2.0);
            let fe = f(xe);
            if fe < fr {
                s[2] = xe;
                v[2] = fe;
            } else {
                s[2] = xr;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = xr;
            v[2] = fr;
        } else {
            let (xc, fc) = if fr < v[2] {
                let x = at(-0.5);
                (x, f(x))
            } else {
                let x = at(0.5);
                (x, f(x))
            };
            if fc < v[2].min(fr) {
                s[2] = xc;
                v[2] = fc;
            } else {
                for i in 1..3 {
                    s[i] = [(s[i][0] + s[0][0]) / 2.0, (s[i][1] + s[0][1]) / 2.0];
                    v[i] = f(s[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap_or(0);
    (s[best], v[best])
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_are_exact_for_polynomials() {
        for n in [1, 2, 4, 8, 16, 32] {
            let r = GaussRule::new(n);
            let deg = 2 * n - 1;
            let v = r.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!(((v - exact) / exact).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let v = adaptive_gk(|x| x.sqrt(), 0.0, 1.0, 1e-13, 60);
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, v) = nelder_mead_2d(|p| (p[0] - 1.0).powi(2) + 3.0 * (p[1] + 2.0).powi(2), [0.0, 0.0], 0.5, 1e-20, 2000);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 2.0).abs() < 1e-6 && v < 1e-12);
    }
}
