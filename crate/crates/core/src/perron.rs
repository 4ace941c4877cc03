//! The smoothed Perron kernel
//!
//! ```text
//! I(y) = (1/2πi) ∫_{(c)} y^s ((e^{λs} − 1)/(λs))^N ds/s
//! ```
//!
//! Averaging the classical Perron integral over `y e^{t_1+…+t_N}` with
//! `t_i` uniform on `[0, λ]` shows `I(y) = P(S > ln(1/y))` for `S` a sum of
//! `N` independent uniforms on `[0, λ]`, whose distribution function is the
//! Irwin–Hall piecewise polynomial. [`kernel_closed_form`] evaluates that
//! directly; [`kernel_contour`] integrates along the vertical line as an
//! independent check.

use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::{expint_e, expm1};

/// Classical Perron indicator: 1 for `y > 1`, 1/2 at `y = 1`, 0 below.
pub fn perron_indicator(y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::invalid(format!("y must be positive, got {y}")));
    }
    Ok(if y > 1.0 {
        1.0
    } else if y == 1.0 {
        0.5
    } else {
        0.0
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Distribution function of a sum of `n` uniforms on `[0, width]`.
pub fn irwin_hall_cdf(z: f64, width: f64, n: u32) -> f64 {
    let span = width * f64::from(n);
    if z <= 0.0 {
        return 0.0;
    }
    if z >= span {
        return 1.0;
    }
    // the alternating sum loses digits near the top; use the symmetry
    if z > 0.5 * span {
        return 1.0 - irwin_hall_cdf(span - z, width, n);
    }
    let t = z / width;
    let kmax = t.floor() as u32;
    let sum: f64 = (0..=kmax.min(n))
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n, k) * (t - f64::from(k)).powi(n as i32)
        })
        .sum();
    (sum / factorial(n)).clamp(0.0, 1.0)
}

/// Density of a sum of `n` uniforms on `[0, width]`.
pub fn irwin_hall_pdf(z: f64, width: f64, n: u32) -> f64 {
    let span = width * f64::from(n);
    if z < 0.0 || z > span {
        return 0.0;
    }
    if n == 1 {
        return 1.0 / width;
    }
    let z = if z > 0.5 * span { span - z } else { z };
    let t = z / width;
    let kmax = t.floor() as u32;
    let sum: f64 = (0..=kmax.min(n))
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n, k) * (t - f64::from(k)).powi(n as i32 - 1)
        })
        .sum();
    (sum / (factorial(n - 1) * width)).max(0.0)
}

fn check_shape(lambda: f64, n: u32) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    Ok(())
}

/// `I_{c,λ,N}(y)` from the Irwin–Hall distribution; independent of `c`.
///
/// Equals 1 for `y ≥ 1` and 0 for `y ≤ e^{-λN}`.
pub fn kernel_closed_form(y: f64, lambda: f64, n: u32) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::invalid(format!("y must be positive, got {y}")));
    }
    check_shape(lambda, n)?;
    if y >= 1.0 {
        return Ok(1.0);
    }
    Ok(1.0 - irwin_hall_cdf(-y.ln(), lambda, n))
}

/// Parameters of the contour evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerronKernelParams {
    /// Abscissa of the vertical line.
    pub c: f64,
    pub lambda: f64,
    pub n: u32,
    /// Absolute tolerance on the kernel value.
    pub quad_tol: f64,
    /// Height where numerical quadrature hands over to the closed-form tail.
    pub t_max: f64,
}

/// Evaluation budget for one contour integral.
pub const EVAL_BUDGET: u64 = 1_000_000;

impl PerronKernelParams {
    /// Parameters with the default split height.
    pub fn new(c: f64, lambda: f64, n: u32, quad_tol: f64) -> Result<Self> {
        let t_max = Self::default_t_max(c, lambda, n, quad_tol);
        let p = PerronKernelParams {
            c,
            lambda,
            n,
            quad_tol,
            t_max,
        };
        p.validate()?;
        Ok(p)
    }

    /// The line `c = 1/log H`, `λ = 10/T` and `N = ⌊A log log H⌋`, with
    /// `T = log X/(10⁴ (log log X)²)` and `X = H² log log H`.
    pub fn asymptotic_choice(h: u64, a: f64, quad_tol: f64) -> Result<Self> {
        if h < 16 {
            return Err(Error::invalid(
                "the asymptotic parameter choice needs H >= 16",
            ));
        }
        let hf = h as f64;
        let x = hf * hf * hf.ln().ln();
        let t = x.ln() / (1e4 * x.ln().ln().powi(2));
        let n = (a * hf.ln().ln()).floor();
        if n < 1.0 {
            return Err(Error::invalid("A log log H must be at least 1"));
        }
        Self::new(1.0 / hf.ln(), 10.0 / t, n as u32, quad_tol)
    }

    /// Height beyond which `|integrand| ≤ ((e^{λc}+1)/λ)^N / t^{N+1}` integrates
    /// to less than `tol/2`, capped where the oscillation would make
    /// quadrature expensive; the remaining tail is evaluated in closed form.
    pub fn certified_t_max(c: f64, lambda: f64, n: u32, quad_tol: f64) -> f64 {
        let nf = f64::from(n);
        let k = ((lambda * c).exp() + 1.0) / lambda;
        // ∫_T^∞ k^N t^{-N-1} dt / π = k^N / (N π T^N) ≤ tol/2
        k * (2.0 / (nf * std::f64::consts::PI * quad_tol)).powf(1.0 / nf)
    }

    fn default_t_max(c: f64, lambda: f64, n: u32, quad_tol: f64) -> f64 {
        Self::certified_t_max(c, lambda, n, quad_tol).min(64.0 + 32.0 / lambda)
    }

    pub fn validate(&self) -> Result<()> {
        check_shape(self.lambda, self.n)?;
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::invalid(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol <= 1e-2) {
            return Err(Error::invalid(format!(
                "quadrature tolerance {} not in (0, 1e-2]",
                self.quad_tol
            )));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::invalid("t_max must be positive and finite"));
        }
        Ok(())
    }
}

/// `y^s ((e^{λs}-1)/(λs))^N / s`.
fn integrand(log_y: f64, lambda: f64, n: u32, s: Complex64) -> Complex64 {
    let ratio = expm1(s * lambda) / (s * lambda);
    (s * log_y).exp() * ratio.powi(n as i32) / s
}

// 15-point Kronrod nodes and weights with the embedded 7-point Gauss rule.
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

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Global adaptive Gauss–Kronrod on `[a, b]`, starting from `panels` equal
/// pieces and bisecting the worst panel until the summed error estimate is
/// below `tol`.
fn adaptive_integral<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: f64,
) -> Result<f64> {
    let mut heap = BinaryHeap::with_capacity(panels * 2);
    let width = (b - a) / panels as f64;
    let mut evals = 0u64;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        heap.push(kronrod(&f, lo, hi));
        evals += 15;
    }
    let mut total_err: f64 = heap.iter().map(|p| p.error).sum();
    let mut splits = 0u64;
    loop {
        if total_err <= tol {
            // the running total drifts; confirm against a fresh sum
            total_err = heap.iter().map(|p| p.error).sum();
            if total_err <= tol {
                break;
            }
        }
        if evals > EVAL_BUDGET {
            return Err(Error::NonConvergence {
                what: "contour quadrature",
                budget: EVAL_BUDGET,
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evals += 30;
        splits += 1;
        if splits % 1024 == 0 {
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    let mut values: Vec<f64> = heap.iter().map(|p| p.value).collect();
    values.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    Ok(values.iter().sum())
}

/// `∫_{t_max}^∞ F(c + it) dt` in closed form: expanding `(e^{λs} − 1)^N`
/// turns the integrand into `Σ_k a_k e^{s L_k} s^{-(N+1)} / λ^N`, and each
/// term integrates to a generalized exponential integral.
fn contour_tail(log_y: f64, params: &PerronKernelParams) -> Complex64 {
    let n = params.n;
    let s0 = Complex64::new(params.c, params.t_max);
    let s0_pow = s0.powi(-(n as i32));
    let mut total = Complex64::default();
    for k in 0..=n {
        let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = sign * binomial(n, k);
        let shift = log_y + params.lambda * f64::from(k);
        total += expint_e(n + 1, -s0 * shift) * coeff;
    }
    // ∫ dt = (1/i) ∫ ds
    total * s0_pow / params.lambda.powi(n as i32) / Complex64::new(0.0, 1.0)
}

/// `I_{c,λ,N}(y)` by quadrature along `Re(s) = c`.
///
/// Conjugate symmetry reduces the integral to `(1/π) ∫_0^∞ Re F(c + it) dt`.
/// Adaptive Gauss–Kronrod covers `[0, t_max]` with panels no wider than half
/// the shortest oscillation period; the rest is added in closed form.
pub fn kernel_contour(y: f64, params: &PerronKernelParams) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::invalid(format!("y must be positive, got {y}")));
    }
    params.validate()?;
    let log_y = y.ln();
    let PerronKernelParams {
        c,
        lambda,
        n,
        t_max,
        ..
    } = *params;
    let omega = log_y
        .abs()
        .max((log_y + lambda * f64::from(n)).abs())
        .max(lambda);
    let panels = ((t_max * omega / std::f64::consts::PI).ceil() as usize).max(8);
    let head = adaptive_integral(
        |t| integrand(log_y, lambda, n, Complex64::new(c, t)).re,
        0.0,
        t_max,
        panels,
        0.5 * params.quad_tol * std::f64::consts::PI,
    )?;
    let tail = contour_tail(log_y, params).re;
    Ok((head + tail) / std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_cases() {
        assert_eq!(perron_indicator(3.0).unwrap(), 1.0);
        assert_eq!(perron_indicator(1.0).unwrap(), 0.5);
        assert_eq!(perron_indicator(0.2).unwrap(), 0.0);
        assert!(perron_indicator(0.0).is_err());
    }

    #[test]
    fn closed_form_cases() {
        for &(lambda, n) in &[(0.5, 1u32), (0.1, 3), (1.0, 5)] {
            assert_eq!(kernel_closed_form(2.0, lambda, n).unwrap(), 1.0);
            let y = (-2.0 * lambda * f64::from(n)).exp();
            assert_eq!(kernel_closed_form(y, lambda, n).unwrap(), 0.0);
        }
        let lambda: f64 = 0.3;
        let half = kernel_closed_form((-lambda / 2.0).exp(), lambda, 1).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
        let half2 = kernel_closed_form((-lambda).exp(), lambda, 2).unwrap();
        assert!((half2 - 0.5).abs() < 1e-15);
        assert!(kernel_closed_form(-1.0, 1.0, 1).is_err());
        assert!(kernel_closed_form(0.5, 0.0, 1).is_err());
        assert!(kernel_closed_form(0.5, 1.0, 0).is_err());
    }

    #[test]
    fn irwin_hall_against_convolution() {
        // N = 2 on [0,1]: F(z) = z²/2 for z ≤ 1, 1 - (2-z)²/2 above
        for &z in &[0.1, 0.5, 0.9, 1.2, 1.7] {
            let exact: f64 = if z <= 1.0 {
                z * z / 2.0
            } else {
                1.0 - (2.0 - z) * (2.0 - z) / 2.0
            };
            assert!((irwin_hall_cdf(z, 1.0, 2) - exact).abs() < 1e-15);
        }
        // density integrates to the cdf
        let (w, n) = (0.2, 4);
        let m = 4000;
        let z = 0.55;
        let h = z / m as f64;
        let mut s = irwin_hall_pdf(0.0, w, n) + irwin_hall_pdf(z, w, n);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * irwin_hall_pdf(i as f64 * h, w, n);
        }
        assert!((s * h / 3.0 - irwin_hall_cdf(z, w, n)).abs() < 1e-10);
    }

    #[test]
    fn closed_form_is_monotone_and_bounded() {
        let (lambda, n) = (0.4, 3);
        let lo = (-2.0 * lambda * f64::from(n)).exp();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let y = lo + (2.0 - lo) * f64::from(i) / 1000.0;
            let v = kernel_closed_form(y, lambda, n).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn contour_examples() {
        let p = PerronKernelParams::new(0.1, 0.5, 3, 1e-6).unwrap();
        assert!((kernel_contour(2.0, &p).unwrap() - 1.0).abs() <= 1e-6);
        for k in 0..=10 {
            let y = (-f64::from(k) * 0.5 * 3.0 / 10.0).exp();
            let cf = kernel_closed_form(y, 0.5, 3).unwrap();
            let ct = kernel_contour(y, &p).unwrap();
            assert!((cf - ct).abs() <= 1e-6, "y={y}: {cf} vs {ct}");
        }
    }

    #[test]
    fn contour_does_not_depend_on_c() {
        for &n in &[1u32, 2, 5] {
            let a = PerronKernelParams::new(0.05, 0.1, n, 1e-7).unwrap();
            let b = PerronKernelParams::new(0.1, 0.1, n, 1e-7).unwrap();
            for &y in &[0.95, 0.99, 1.3] {
                let va = kernel_contour(y, &a).unwrap();
                let vb = kernel_contour(y, &b).unwrap();
                assert!((va - vb).abs() <= 2e-7, "n={n} y={y}");
            }
        }
    }

    #[test]
    fn contour_tail_matches_quadrature() {
        // integrate the tail numerically over a long stretch for N = 3 where
        // it converges fast, and compare with the exponential-integral form
        let mut p = PerronKernelParams::new(0.2, 0.3, 3, 1e-8).unwrap();
        p.t_max = 20.0;
        let log_y: f64 = -0.4;
        let numeric = adaptive_integral(
            |t| integrand(log_y, p.lambda, p.n, Complex64::new(p.c, t)).re,
            20.0,
            20_000.0,
            4000,
            1e-13,
        )
        .unwrap();
        let closed = contour_tail(log_y, &p).re;
        // remainder beyond 20000 is below ((e^{0.06}+1)/0.3)^3 / (3·20000³)
        assert!((numeric - closed).abs() < 1e-11, "{numeric} vs {closed}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(PerronKernelParams::new(0.0, 0.5, 2, 1e-6).is_err());
        assert!(PerronKernelParams::new(0.1, 0.5, 0, 1e-6).is_err());
        assert!(PerronKernelParams::new(0.1, 0.5, 2, 0.1).is_err());
        let p = PerronKernelParams::new(0.1, 0.5, 2, 1e-6).unwrap();
        assert!(kernel_contour(0.0, &p).is_err());
    }

    #[test]
    fn asymptotic_choice_is_exposed() {
        let p = PerronKernelParams::asymptotic_choice(1000, 2.0, 1e-6).unwrap();
        assert!((p.c - 1.0 / 1000f64.ln()).abs() < 1e-15);
        assert_eq!(p.n, 3);
        assert!(p.lambda > 0.0);
    }
}
