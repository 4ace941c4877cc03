//! Empirical moments of `h(-d)` against their random-model predictions, and
//! the main term `Σ_{h≤H} F(h)` rebuilt from the smoothed kernel.
//!
//! From `h(-d) = √d L(1, χ_{-d})/π` one expects
//!
//! ```text
//! Σ_{d≤X} h(-d)^{-s}  ≈  3 π^{s-2} E(L^{-s}) ∫_1^X x^{-s/2} dx
//! ```
//!
//! over fundamental `d`, and the analogue over primes `p ≡ 3 (mod 4)` with
//! the symmetric model. For the main term, `I(πH/(√x L))` is the probability
//! that `x < K e^{2S}` with `K = π²H²/L²` and `S` Irwin–Hall, so each draw's
//! `x`-integral reduces to `E_S(clamp(K e^{2S}, 1, X)) - 1`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::arith;
use crate::census::reduction_cutoff;
use crate::classnum::ClassNumberTable;
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::perron::{irwin_hall_cdf, irwin_hall_pdf, PerronKernelParams};
use crate::randeuler::{EulerMoments, EulerSampler, MomentResult, RandomEulerModel};
use crate::special::expm1;
use crate::sum::{ComplexNeumaier, Neumaier};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub x: u64,
    /// Abscissa of the line `Re(s) = c`.
    pub c: f64,
    /// Height `T` of the provable range `|s| ≤ T`.
    pub t: f64,
    pub s_list: Vec<Complex64>,
    /// Reject `s` outside `|s| ≤ T` instead of flagging them.
    pub strict_range: bool,
    /// Prime cutoff for the model moments.
    pub prime_cutoff: u64,
}

impl PipelineConfig {
    /// `c = 1/log X`, `T = log X/(10⁴ (log log X)²)` and `s_list = [c]`.
    pub fn new(x: u64) -> Result<Self> {
        if x < 16 {
            return Err(Error::invalid(format!("X must be at least 16, got {x}")));
        }
        let lx = (x as f64).ln();
        let c = 1.0 / lx;
        Ok(PipelineConfig {
            x,
            c,
            t: lx / (1e4 * lx.ln().powi(2)),
            s_list: vec![Complex64::new(c, 0.0)],
            strict_range: false,
            prime_cutoff: crate::randeuler::DEFAULT_PRIME_CUTOFF,
        })
    }

    pub fn with_s(mut self, s_list: Vec<Complex64>) -> Self {
        self.s_list = s_list;
        self
    }

    pub fn in_range(&self, s: Complex64) -> bool {
        s.norm() <= self.t
    }

    fn validate(&self, table: &ClassNumberTable) -> Result<()> {
        if table.x() < self.x {
            return Err(Error::invalid(format!(
                "table reaches X = {}, config needs {}",
                table.x(),
                self.x
            )));
        }
        if self.strict_range {
            if let Some(s) = self.s_list.iter().find(|&&s| !self.in_range(s)) {
                return Err(Error::invalid(format!(
                    "|s| = {} exceeds T = {}",
                    s.norm(),
                    self.t
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentComparison {
    pub s: Complex64,
    pub empirical: Complex64,
    pub model: Complex64,
    /// `|empirical - model|/|model|`, or `|empirical|` when the model vanishes.
    pub rel_error: f64,
    pub in_range: bool,
}

impl MomentComparison {
    fn new(s: Complex64, empirical: Complex64, model: Complex64, in_range: bool) -> Self {
        let diff = (empirical - model).norm();
        let scale = model.norm();
        MomentComparison {
            s,
            empirical,
            model,
            rel_error: if scale > 0.0 { diff / scale } else { diff },
            in_range,
        }
    }
}

/// `Σ h^{-s}` grouped by class number, summed in ascending `h`.
fn grouped_power_sum(counts: &[u64], s: Complex64) -> Complex64 {
    let mut acc = ComplexNeumaier::default();
    for (h, &n) in counts.iter().enumerate().skip(1) {
        if n > 0 {
            acc.add((-s * (h as f64).ln()).exp() * n as f64);
        }
    }
    acc.value()
}

fn class_number_counts<I: Iterator<Item = u32>>(hs: I) -> Vec<u64> {
    let mut counts = vec![0u64; 1];
    for h in hs {
        let h = h as usize;
        if h >= counts.len() {
            counts.resize(h + 1, 0);
        }
        counts[h] += 1;
    }
    counts
}

/// `Σ h(-d)^{-s}` over every fundamental `d` in the table.
pub fn empirical_negative_moment(table: &ClassNumberTable, s: Complex64) -> Complex64 {
    grouped_power_sum(&class_number_counts(table.iter().map(|(_, h)| h)), s)
}

/// `∫_1^X x^{-s/2} dx = (X^{1-s/2} - 1)/(1 - s/2)`, continuous through `s = 2`.
fn power_integral(x: u64, s: Complex64) -> Complex64 {
    let w = Complex64::new(1.0, 0.0) - s * 0.5;
    let lx = (x as f64).ln();
    if w.norm() * lx < 1e-8 {
        return Complex64::new(lx, 0.0) * (Complex64::new(1.0, 0.0) + w * (lx / 2.0));
    }
    expm1(w * lx) / w
}

/// `3 π^{s-2} E(L^{-s}) ∫_1^X x^{-s/2} dx`.
///
/// `model_moment` must be the moment `E(L^{-s})`, that is, computed at `-s`.
pub fn model_negative_moment(
    x: u64,
    s: Complex64,
    model_moment: &MomentResult,
) -> Result<Complex64> {
    if s == Complex64::new(2.0, 0.0) {
        return Err(Error::invalid("s = 2 is a pole of the closed form"));
    }
    if x == 0 {
        return Err(Error::invalid("X must be positive"));
    }
    if (model_moment.s + s).norm() > 1e-12 * (1.0 + s.norm()) {
        return Err(Error::Inconsistent(format!(
            "model moment computed at {} but s = {s}",
            model_moment.s
        )));
    }
    let pi_pow = (s - 2.0).scale(PI.ln()).exp();
    Ok(pi_pow * model_moment.value * power_integral(x, s) * 3.0)
}

/// One comparison row per `s` in the config, in input order.
pub fn compare_moments(
    config: &PipelineConfig,
    table: &ClassNumberTable,
    exec: Execution,
) -> Result<Vec<MomentComparison>> {
    config.validate(table)?;
    let moments = EulerMoments::new(RandomEulerModel::x(config.prime_cutoff))?;
    let counts = class_number_counts(table.iter_up_to(config.x).map(|(_, h)| h));
    let rows = map_indexed(exec, config.s_list.len(), |i| {
        let s = config.s_list[i];
        let mr = moments.moment(-s)?;
        let model = model_negative_moment(config.x, s, &mr)?;
        let empirical = grouped_power_sum(&counts, s);
        Ok(MomentComparison::new(
            s,
            empirical,
            model,
            config.in_range(s),
        ))
    });
    rows.into_iter().collect()
}

/// Which sign of the exponent the prime-variant model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// `π^s E(L^s) Σ p^{-s/2}`.
    AsPrinted,
    /// `π^s E(L^{-s}) Σ p^{-s/2}`, the sign the class number formula gives.
    Conjugate,
}

impl Convention {
    pub fn name(self) -> &'static str {
        match self {
            Convention::AsPrinted => "as_printed",
            Convention::Conjugate => "conjugate",
        }
    }

    fn moment_argument(self, s: Complex64) -> Complex64 {
        match self {
            Convention::AsPrinted => s,
            Convention::Conjugate => -s,
        }
    }
}

/// `Σ h(-p)^{-s}` over primes `p ≤ X`, `p ≡ 3 (mod 4)`.
pub fn empirical_prime_moment(table: &ClassNumberTable, x: u64, s: Complex64) -> Result<Complex64> {
    let primes = prime_discriminants(table, x)?;
    let hs = primes
        .iter()
        .map(|&p| table.get(p).expect("-p is fundamental"));
    Ok(grouped_power_sum(&class_number_counts(hs), s))
}

fn prime_discriminants(table: &ClassNumberTable, x: u64) -> Result<Vec<u64>> {
    if table.x() < x {
        return Err(Error::invalid(format!(
            "table reaches X = {}, need {x}",
            table.x()
        )));
    }
    arith::primes_3_mod_4(x)
}

/// `Σ p^{-s/2}` over primes `p ≤ X`, `p ≡ 3 (mod 4)`.
pub fn prime_power_sum(primes: &[u64], s: Complex64) -> Complex64 {
    let mut acc = ComplexNeumaier::default();
    for &p in primes {
        acc.add((-s * (0.5 * (p as f64).ln())).exp());
    }
    acc.value()
}

/// `π^s E(L(1,𝕐)^{±s}) Σ p^{-s/2}`, the sign chosen by `convention`.
pub fn model_prime_moment(
    x: u64,
    s: Complex64,
    convention: Convention,
    moments: &EulerMoments,
) -> Result<Complex64> {
    let primes = arith::primes_3_mod_4(x)?;
    model_prime_moment_from(&primes, s, convention, moments)
}

fn model_prime_moment_from(
    primes: &[u64],
    s: Complex64,
    convention: Convention,
    moments: &EulerMoments,
) -> Result<Complex64> {
    let mr = moments.moment(convention.moment_argument(s))?;
    let pi_pow = s.scale(PI.ln()).exp();
    Ok(pi_pow * mr.value * prime_power_sum(primes, s))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimeMomentComparison {
    pub convention: Convention,
    pub comparison: MomentComparison,
}

/// Rows ordered by `s`, then by convention in the given order.
pub fn compare_prime_moments(
    config: &PipelineConfig,
    table: &ClassNumberTable,
    conventions: &[Convention],
    exec: Execution,
) -> Result<Vec<PrimeMomentComparison>> {
    config.validate(table)?;
    let primes = prime_discriminants(table, config.x)?;
    let counts = class_number_counts(
        primes
            .iter()
            .map(|&p| table.get(p).expect("-p is fundamental")),
    );
    let moments = EulerMoments::new(RandomEulerModel::y(config.prime_cutoff))?;
    let n = config.s_list.len() * conventions.len();
    let rows = map_indexed(exec, n, |i| {
        let s = config.s_list[i / conventions.len()];
        let convention = conventions[i % conventions.len()];
        let model = model_prime_moment_from(&primes, s, convention, &moments)?;
        let empirical = grouped_power_sum(&counts, s);
        Ok(PrimeMomentComparison {
            convention,
            comparison: MomentComparison::new(s, empirical, model, config.in_range(s)),
        })
    });
    rows.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reconstruction {
    pub h: u64,
    pub x: u64,
    /// `(3/π²) E(∫_1^X I(πH/(√x L)) dx)`.
    pub reconstructed: f64,
    pub std_error: f64,
    /// `Σ_{h' ≤ H} F_X(h')`.
    pub direct: u64,
    /// `Σ_{h' ≤ ⌈H e^{λN}⌉} F_X(h')`.
    pub direct_upper: u64,
    /// Set when `e^{2λN} - 1 > 1`, a smoothing band wider than the main term.
    pub wide_window: bool,
}

const GL_POINTS: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static RULE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut nodes = [0.0; GL_POINTS];
        let mut weights = [0.0; GL_POINTS];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    // re-evaluate the derivative at the converged node
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                    nodes[i] = z;
                    weights[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                    break;
                }
            }
        }
        (nodes, weights)
    })
}

/// `E_S(clamp(k e^{2S}, 1, x)) - 1` for `S` Irwin–Hall on `[0, λN]`.
///
/// The middle band is integrated against the Irwin–Hall density piece by
/// piece; on each piece the integrand is `e^{2s}` times a polynomial of
/// degree `N - 1`, which a 16-point rule integrates to rounding for the
/// piece widths used here.
pub fn clamped_smoothed_integral(k: f64, x: f64, lambda: f64, n: u32) -> f64 {
    let span = lambda * f64::from(n);
    let a = -0.5 * k.ln();
    let b = 0.5 * (x / k).ln();
    let mut acc = Neumaier::default();
    acc.add(irwin_hall_cdf(a, lambda, n));
    acc.add((1.0 - irwin_hall_cdf(b, lambda, n)) * x);
    let (lo, hi) = (a.max(0.0), b.min(span));
    if hi > lo {
        let (nodes, weights) = gauss_legendre();
        let first = (lo / lambda).floor() as u32;
        for piece in first..n {
            let p_lo = (f64::from(piece) * lambda).max(lo);
            let p_hi = (f64::from(piece + 1) * lambda).min(hi);
            if p_hi <= p_lo {
                if f64::from(piece) * lambda >= hi {
                    break;
                }
                continue;
            }
            let mid = 0.5 * (p_lo + p_hi);
            let half = 0.5 * (p_hi - p_lo);
            let mut piece_sum = 0.0;
            for (&z, &w) in nodes.iter().zip(weights) {
                let s = mid + half * z;
                piece_sum += w * (2.0 * s).exp() * irwin_hall_pdf(s, lambda, n);
            }
            acc.add(k * half * piece_sum);
        }
    }
    acc.value() - 1.0
}

/// Monte Carlo `(3/π²) E(∫_1^X I_{c,λ,N}(πH/(√x L)) dx)` with
/// `X = ⌈H² log log H⌉`, next to the census count it approximates.
///
/// The kernel value does not depend on `c`; the inner integral is evaluated
/// exactly per draw. `table` must reach `X`.
pub fn main_term_reconstruction(
    h: u64,
    params: &PerronKernelParams,
    model: &RandomEulerModel,
    n_samples: u64,
    seed: u64,
    table: &ClassNumberTable,
    exec: Execution,
) -> Result<Reconstruction> {
    if h == 0 {
        return Err(Error::invalid("H must be positive"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    params.validate()?;
    let x = reduction_cutoff(h);
    if table.x() < x {
        return Err(Error::invalid(format!(
            "table reaches X = {}, need {x}",
            table.x()
        )));
    }
    let (lambda, n) = (params.lambda, params.n);
    let span = lambda * f64::from(n);
    let sampler = EulerSampler::new(*model)?;
    let scale = (PI * h as f64).powi(2);
    let xf = x as f64;
    let est = sampler.estimate_one(n_samples, seed, exec, |l| {
        clamped_smoothed_integral(scale / (l * l), xf, lambda, n)
    });
    let factor = 3.0 / (PI * PI);
    let upper_h = (h as f64 * span.exp()).ceil() as u64;
    let mut direct = 0;
    let mut direct_upper = 0;
    for (_, k) in table.iter_up_to(x) {
        let k = u64::from(k);
        direct += u64::from(k <= h);
        direct_upper += u64::from(k <= upper_h);
    }
    Ok(Reconstruction {
        h,
        x,
        reconstructed: factor * est.mean,
        std_error: factor * est.std_error,
        direct,
        direct_upper,
        wide_window: (2.0 * span).exp_m1() > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classnum::batch_class_numbers;
    use crate::perron::kernel_closed_form;
    use crate::randeuler::{moment, ModelKind};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let (nodes, weights) = gauss_legendre();
        for deg in 0..32 {
            let q: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(&z, &w)| w * z.powi(deg))
                .sum();
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / f64::from(deg + 1)
            };
            assert!((q - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn empirical_moment_basics() {
        let table = batch_class_numbers(1000, 2).unwrap();
        let zero = empirical_negative_moment(&table, c(0.0, 0.0));
        assert_eq!(zero, c(table.fundamental_count() as f64, 0.0));
        let s = c(0.3, 2.0);
        let a = empirical_negative_moment(&table, s);
        let b = empirical_negative_moment(&table, s.conj());
        assert!((a - b.conj()).norm() < 1e-12 * a.norm());
        let direct: f64 = table.iter().map(|(_, h)| 1.0 / f64::from(h)).sum();
        assert!((empirical_negative_moment(&table, c(1.0, 0.0)).re - direct).abs() < 1e-10);
    }

    #[test]
    fn model_moment_basics() {
        let model = RandomEulerModel::x(1000);
        let x = 5000;
        let m0 =
            model_negative_moment(x, c(0.0, 0.0), &moment(c(0.0, 0.0), &model).unwrap()).unwrap();
        assert!((m0.re - 3.0 / (PI * PI) * (x - 1) as f64).abs() < 1e-9 * m0.re);
        assert!(m0.im.abs() < 1e-12);
        let s = c(1e-6, 0.0);
        let m1 = model_negative_moment(x, s, &moment(-s, &model).unwrap()).unwrap();
        assert!((m1 - m0).norm() < 1e-3 * m0.norm());
        let two = c(2.0, 0.0);
        assert!(model_negative_moment(x, two, &moment(-two, &model).unwrap()).is_err());
        // the argument sign is checked
        assert!(model_negative_moment(x, s, &moment(s, &model).unwrap()).is_err());
        // continuity across the removable point
        let near = c(2.0, 1e-9);
        let v = model_negative_moment(x, near, &moment(-near, &model).unwrap()).unwrap();
        assert!(v.norm().is_finite());
    }

    #[test]
    fn comparison_rows_and_flags() {
        let table = batch_class_numbers(20_000, 2).unwrap();
        let mut config = PipelineConfig::new(20_000).unwrap();
        config.prime_cutoff = 10_000;
        let cc = config.c;
        config.s_list = vec![c(cc, 0.0), c(cc, 5.0), c(cc, -5.0)];
        let rows = compare_moments(&config, &table, Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| !r.in_range));
        assert!(rows[0].rel_error < 0.05, "{}", rows[0].rel_error);
        assert!(
            (rows[1].empirical - rows[2].empirical.conj()).norm() < 1e-9 * rows[1].empirical.norm()
        );
        assert!((rows[1].model - rows[2].model.conj()).norm() < 1e-9 * rows[1].model.norm());
        config.strict_range = true;
        assert!(compare_moments(&config, &table, Execution::Sequential).is_err());
    }

    #[test]
    fn prime_variant_at_zero() {
        let x = 10_000;
        let table = batch_class_numbers(x, 2).unwrap();
        let count = arith::primes_3_mod_4(x).unwrap().len() as f64;
        let moments = EulerMoments::new(RandomEulerModel::y(1000)).unwrap();
        let zero = c(0.0, 0.0);
        assert_eq!(
            empirical_prime_moment(&table, x, zero).unwrap(),
            c(count, 0.0)
        );
        for conv in [Convention::AsPrinted, Convention::Conjugate] {
            let m = model_prime_moment(x, zero, conv, &moments).unwrap();
            assert!((m.re - count).abs() < 1e-9 && m.im == 0.0);
        }
    }

    #[test]
    fn clamped_integral_against_quadrature() {
        // compare with a direct x-integral of the closed-form kernel
        let (lambda, n) = (0.1, 3u32);
        let (hh, l, x) = (30.0f64, 0.8, 4000.0);
        let k = (PI * hh / l).powi(2);
        let exact = clamped_smoothed_integral(k, x, lambda, n);
        let f = |t: f64| kernel_closed_form(PI * hh / (t.sqrt() * l), lambda, n).unwrap();
        let m = 200_000;
        let step = (x - 1.0) / m as f64;
        let mut acc = f(1.0) + f(x);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(1.0 + step * i as f64);
        }
        let simpson = acc * step / 3.0;
        assert!(
            (exact - simpson).abs() < 1e-6 * exact,
            "{exact} vs {simpson}"
        );
    }

    #[test]
    fn clamped_integral_limits() {
        // everything above X: integral is X - 1
        assert!((clamped_smoothed_integral(1e9, 100.0, 0.1, 2) - 99.0).abs() < 1e-9);
        // everything below 1: integral vanishes
        assert!(clamped_smoothed_integral(1e-3, 100.0, 0.1, 2).abs() < 1e-12);
        // sharp kernel: min(k, X) - 1
        let v = clamped_smoothed_integral(50.0, 100.0, 1e-10, 2);
        assert!((v - 49.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_model_reconstruction() {
        // with L = 1 the expectation is a single exact evaluation
        let h = 20;
        let table = batch_class_numbers(reduction_cutoff(h), 1).unwrap();
        let params = PerronKernelParams::new(0.1, 0.01, 2, 1e-6).unwrap();
        let model = RandomEulerModel::new(ModelKind::Degenerate, 100);
        let r =
            main_term_reconstruction(h, &params, &model, 1000, 1, &table, Execution::Sequential)
                .unwrap();
        let k = (PI * h as f64).powi(2);
        let expected = 3.0 / (PI * PI) * clamped_smoothed_integral(k, r.x as f64, 0.01, 2);
        assert!((r.reconstructed - expected).abs() < 1e-9 * expected);
        assert!(r.std_error < 1e-9 * expected);
        assert!(r.direct <= r.direct_upper);
        assert!(!r.wide_window);
    }

    #[test]
    fn reconstruction_is_execution_invariant() {
        let h = 30;
        let table = batch_class_numbers(reduction_cutoff(h), 1).unwrap();
        let params = PerronKernelParams::new(0.1, 0.02, 2, 1e-6).unwrap();
        let model = RandomEulerModel::x(1000);
        let a =
            main_term_reconstruction(h, &params, &model, 5000, 9, &table, Execution::Sequential)
                .unwrap();
        let b = main_term_reconstruction(h, &params, &model, 5000, 9, &table, Execution::Parallel)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wide_window_flag() {
        let h = 20;
        let table = batch_class_numbers(reduction_cutoff(h), 1).unwrap();
        let params = PerronKernelParams::new(0.1, 0.2, 2, 1e-6).unwrap();
        let model = RandomEulerModel::x(100);
        let r =
            main_term_reconstruction(h, &params, &model, 1000, 1, &table, Execution::Sequential)
                .unwrap();
        assert!(r.wide_window);
    }
}
