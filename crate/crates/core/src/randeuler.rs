//! Random Euler products `L(1, 𝕏) = Π_p (1 - 𝕏(p)/p)^{-1}`.
//!
//! Two local laws are modelled. The `X` law takes `±1` with probability
//! `p/(2(p+1))` each and `0` with probability `1/(p+1)`, mirroring `χ_d(p)`
//! over random fundamental `d`. The `Y` law takes `±1` with probability `1/2`,
//! mirroring `χ_p` over primes `p ≡ 3 (mod 4)`.
//!
//! Complex moments `E(L^s)` are computed exactly as products of local
//! expectations up to a prime cutoff `P`, with the primes beyond `P` handled
//! by a Taylor expansion of the log local factor in `1/p` summed against
//! prime zeta tails. Monte Carlo sampling is provided as an independent check.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::arith::{self, Constants};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng;
use crate::special::{expm1, ln1p, prime_zeta};
use crate::sum::{ComplexNeumaier, Neumaier};

pub const DEFAULT_PRIME_CUTOFF: u64 = 1_000_000;
/// Prime cutoff used for sampling; the truncation bias of `E(L^-2)` at this
/// cutoff is about `1e-5`, well under Monte Carlo noise at desk-scale sizes.
pub const DEFAULT_SAMPLING_CUTOFF: u64 = 10_000;
pub const DEFAULT_MAX_ABS_S: f64 = 64.0;
/// Smallest prime cutoff accepted by [`moment`].
pub const MIN_MOMENT_CUTOFF: u64 = 100;
/// Number of draws per Monte Carlo block; blocks are the unit of parallelism
/// and of the fixed-order reduction.
pub const BLOCK_SIZE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    X,
    Y,
    /// Every local variable is 0, so `L = 1`; a test hook.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomEulerModel {
    pub kind: ModelKind,
    pub prime_cutoff: u64,
    /// Number of expansion orders used for primes above the cutoff, 0 to 2.
    pub tail_order: u8,
    pub max_abs_s: f64,
}

impl RandomEulerModel {
    pub fn new(kind: ModelKind, prime_cutoff: u64) -> Self {
        RandomEulerModel {
            kind,
            prime_cutoff,
            tail_order: 2,
            max_abs_s: DEFAULT_MAX_ABS_S,
        }
    }

    pub fn x(prime_cutoff: u64) -> Self {
        Self::new(ModelKind::X, prime_cutoff)
    }

    pub fn y(prime_cutoff: u64) -> Self {
        Self::new(ModelKind::Y, prime_cutoff)
    }

    pub fn with_tail_order(mut self, order: u8) -> Self {
        self.tail_order = order;
        self
    }

    /// `(P(+1), P(-1), P(0))` at the prime `p`.
    pub fn local_law(&self, p: u64) -> (f64, f64, f64) {
        let pf = p as f64;
        match self.kind {
            ModelKind::X => {
                let pm = pf / (2.0 * (pf + 1.0));
                (pm, pm, 1.0 / (pf + 1.0))
            }
            ModelKind::Y => (0.5, 0.5, 0.0),
            ModelKind::Degenerate => (0.0, 0.0, 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.tail_order > 2 {
            return Err(Error::invalid(format!(
                "tail order {} not in 0..=2",
                self.tail_order
            )));
        }
        if !(self.max_abs_s > 0.0) {
            return Err(Error::invalid("max |s| must be positive"));
        }
        if self.prime_cutoff < 2 {
            return Err(Error::invalid("prime cutoff must be at least 2"));
        }
        Ok(())
    }

    fn check_s(&self, s: Complex64) -> Result<()> {
        if !(s.norm() <= self.max_abs_s) {
            return Err(Error::invalid(format!(
                "|s| = {} exceeds the configured maximum {}",
                s.norm(),
                self.max_abs_s
            )));
        }
        Ok(())
    }
}

/// `log E((1 - Z/p)^{-s})` for the local variable `Z` at `p`.
fn log_local_factor(kind: ModelKind, p: u64, s: Complex64) -> Complex64 {
    let inv = 1.0 / p as f64;
    let a = expm1(-s * (-inv).ln_1p());
    let b = expm1(-s * inv.ln_1p());
    let w = match kind {
        ModelKind::X => {
            let pf = p as f64;
            (a + b) * (pf / (2.0 * (pf + 1.0)))
        }
        ModelKind::Y => (a + b) * 0.5,
        ModelKind::Degenerate => Complex64::new(0.0, 0.0),
    };
    ln1p(w)
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| n % k != 0)
}

/// `E((1 - Z/p)^{-s})`, the expectation of one Euler factor raised to `s`.
pub fn local_factor(p: u64, s: Complex64, model: &RandomEulerModel) -> Result<Complex64> {
    model.check_s(s)?;
    if !is_prime(p) {
        return Err(Error::invalid(format!("{p} is not prime")));
    }
    let inv = 1.0 / p as f64;
    let a = (-s * (-inv).ln_1p()).exp();
    let b = (-s * inv.ln_1p()).exp();
    let pf = p as f64;
    Ok(match model.kind {
        ModelKind::X => (a + b) * (pf / (2.0 * (pf + 1.0))) + 1.0 / (pf + 1.0),
        ModelKind::Y => (a + b) * 0.5,
        ModelKind::Degenerate => Complex64::new(1.0, 0.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentResult {
    pub s: Complex64,
    /// `E(L^s)`.
    pub value: Complex64,
    /// Bound on the relative error of `value`: primes beyond the cutoff at
    /// the configured expansion order, plus a floating-point allowance.
    pub truncation_error_bound: f64,
}

/// `Σ_{p > P} p^{-k}` from the prime zeta function.
pub fn prime_zeta_tail(k: u32, prime_cutoff: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("prime zeta tail needs k >= 2"));
    }
    let primes = arith::primes_up_to(prime_cutoff)?;
    Ok(prime_tail_from(k, &primes))
}

fn prime_tail_from(k: u32, primes: &[u64]) -> f64 {
    let mut head = Neumaier::default();
    for &p in primes.iter().rev() {
        head.add((p as f64).powi(-(k as i32)));
    }
    let tail = prime_zeta(k) - head.value();
    // the tail is below Σ_{n>P} n^-k; clamp rounding noise into [0, that]
    let p = *primes.last().unwrap_or(&1) as f64;
    tail.clamp(0.0, p.powi(1 - k as i32) / f64::from(k - 1))
}

const SERIES_DEGREE: usize = 60;

fn series_mul<T>(a: &[T], b: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    let n = a.len();
    let mut out = vec![T::default(); n];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().take(n - i).enumerate() {
            out[i + j] = out[i + j] + ai * bj;
        }
    }
    out
}

/// Coefficients of `E(u) - 1` where `E(u) = E((1 - Z u)^{-s})` restricted to
/// even powers of `u` (odd moments of `Z` vanish), up to degree `n - 1`.
fn even_binomial_series(s: Complex64, n: usize) -> Vec<Complex64> {
    let mut coeff = vec![Complex64::default(); n];
    let mut rising = Complex64::new(1.0, 0.0);
    for k in 1..n {
        rising = rising * (s + (k as f64 - 1.0)) / k as f64;
        if k % 2 == 0 {
            coeff[k] = rising;
        }
    }
    coeff
}

/// Taylor coefficients in `u = 1/p` of `log E((1 - Z u)^{-s})`, degree < `n`.
fn log_factor_series(kind: ModelKind, s: Complex64, n: usize) -> Vec<Complex64> {
    let even = even_binomial_series(s, n);
    let a = match kind {
        ModelKind::X => {
            // P(Z ≠ 0) = p/(p+1) = 1/(1+u)
            let c: Vec<Complex64> = (0..n)
                .map(|j| Complex64::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
                .collect();
            series_mul(&c, &even)
        }
        ModelKind::Y => even,
        ModelKind::Degenerate => vec![Complex64::default(); n],
    };
    log1p_series(&a)
}

fn log1p_series<T>(a: &[T]) -> Vec<T>
where
    T: Copy
        + Default
        + PartialEq
        + std::ops::Add<Output = T>
        + std::ops::Mul<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let mut out = vec![T::default(); a.len()];
    let mut power = a.to_vec();
    for j in 1..a.len() {
        if power.iter().all(|&c| c == T::default()) {
            break;
        }
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        for (o, &p) in out.iter_mut().zip(&power) {
            *o = *o + p * (sign / j as f64);
        }
        power = series_mul(&power, a);
    }
    out
}

/// Bound on `Σ_{p > P} |log factor − its Taylor polynomial of degree < d|`,
/// `d = 2·order + 2`, via the nonnegative majorant `−log(1 − M(u))`.
fn tail_remainder_bound(kind: ModelKind, sigma: f64, order: u8, prime_cutoff: u64) -> f64 {
    if kind == ModelKind::Degenerate || sigma == 0.0 {
        return 0.0;
    }
    let n = SERIES_DEGREE + 1;
    let binom_even: Vec<f64> = even_binomial_series(Complex64::new(sigma, 0.0), n)
        .iter()
        .map(|c| c.re)
        .collect();
    let majorant = match kind {
        ModelKind::X => series_mul(&vec![1.0; n], &binom_even),
        _ => binom_even,
    };
    // -log(1 - M) = Σ M^j / j; all coefficients nonnegative
    let mut g = vec![0.0; n];
    let mut power = majorant.clone();
    for j in 1..n {
        if power.iter().all(|&c| c == 0.0) {
            break;
        }
        for (o, &p) in g.iter_mut().zip(&power) {
            *o += p / j as f64;
        }
        power = series_mul(&power, &majorant);
    }

    let m_closed = |r: f64| {
        let even = 0.5 * ((1.0 - r).powf(-sigma) + (1.0 + r).powf(-sigma)) - 1.0;
        match kind {
            ModelKind::X => even / (1.0 - r),
            _ => even,
        }
    };
    // radius where the majorant reaches 1/2
    let (mut lo, mut hi) = (0.0, 0.99);
    if m_closed(hi) > 0.5 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if m_closed(mid) > 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        lo = hi;
    }
    let r = lo;
    let u = 1.0 / prime_cutoff as f64;
    if u >= 0.9 * r {
        return f64::INFINITY;
    }
    let g_at_r = -(1.0 - m_closed(r)).ln();
    let d = 2 * order as usize + 2;
    let mut rem: f64 = (d..n).rev().map(|k| g[k] * u.powi(k as i32)).sum();
    rem += g_at_r * (u / r).powi(n as i32) / (1.0 - u / r);
    // R(u) ≤ R(1/P)(uP)^d and Σ_{n>P} n^-d ≤ P^{1-d}/(d-1)
    rem * prime_cutoff as f64 / (d as f64 - 1.0)
}

/// Exact-product moment engine with primes and tail sums cached per model.
#[derive(Clone, Debug)]
pub struct EulerMoments {
    model: RandomEulerModel,
    primes: Vec<u64>,
    /// `Σ_{p>P} p^-k` for `k = 2..=5`.
    prime_tails: [f64; 4],
}

impl EulerMoments {
    pub fn new(model: RandomEulerModel) -> Result<Self> {
        model.validate()?;
        if model.prime_cutoff < MIN_MOMENT_CUTOFF {
            return Err(Error::invalid(format!(
                "prime cutoff {} below the minimum {MIN_MOMENT_CUTOFF}",
                model.prime_cutoff
            )));
        }
        let primes = arith::primes_up_to(model.prime_cutoff)?;
        let prime_tails = [2, 3, 4, 5].map(|k| prime_tail_from(k, &primes));
        Ok(EulerMoments {
            model,
            primes,
            prime_tails,
        })
    }

    pub fn model(&self) -> &RandomEulerModel {
        &self.model
    }

    /// `E(L^s)`.
    pub fn moment(&self, s: Complex64) -> Result<MomentResult> {
        self.model.check_s(s)?;
        let kind = self.model.kind;
        let mut log_sum = ComplexNeumaier::default();
        let mut abs_sum = Neumaier::default();
        for &p in self.primes.iter().rev() {
            let l = log_local_factor(kind, p, s);
            abs_sum.add(l.norm());
            log_sum.add(l);
        }

        let order = self.model.tail_order;
        let mut tail = Complex64::default();
        if order > 0 {
            let coeff = log_factor_series(kind, s, 2 * order as usize + 2);
            for k in 2..=(2 * order as usize + 1) {
                tail += coeff[k] * self.prime_tails[k - 2];
            }
        }
        log_sum.add(tail);
        let log_value = log_sum.value();

        let truncation = tail_remainder_bound(kind, s.norm(), order, self.model.prime_cutoff);
        let rounding = 16.0 * f64::EPSILON * (abs_sum.value() + tail.norm()) + 4.0 * f64::EPSILON;
        let err = truncation + rounding;
        Ok(MomentResult {
            s,
            value: log_value.exp(),
            truncation_error_bound: if err.is_finite() {
                err.exp_m1()
            } else {
                f64::INFINITY
            },
        })
    }
}

/// `E(L(1, model)^s)`.
pub fn moment(s: Complex64, model: &RandomEulerModel) -> Result<MomentResult> {
    EulerMoments::new(*model)?.moment(s)
}

/// Mean and standard error of a Monte Carlo average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

/// Draws truncated products `Π_{p≤P} (1 - Z(p)/p)^{-1}`.
///
/// The draw for seed `k` uses the counter-based stream keyed by `k`, with the
/// `j`-th prime consuming counter `j`; a draw never depends on any other.
#[derive(Clone, Debug)]
pub struct EulerSampler {
    model: RandomEulerModel,
    primes: Vec<u64>,
    /// raw `u64` thresholds: `r < plus` gives `+1`, `r < nonzero` gives `-1`
    plus: Vec<u64>,
    nonzero: Vec<u64>,
    /// `-ln(1 - 1/p)` and `-ln(1 + 1/p)`
    log_plus: Vec<f64>,
    log_minus: Vec<f64>,
}

fn probability_threshold(prob: f64) -> u64 {
    if prob >= 1.0 {
        u64::MAX
    } else {
        (prob * 18_446_744_073_709_551_616.0) as u64
    }
}

impl EulerSampler {
    pub fn new(model: RandomEulerModel) -> Result<Self> {
        model.validate()?;
        let primes = arith::primes_up_to(model.prime_cutoff)?;
        let mut plus = Vec::with_capacity(primes.len());
        let mut nonzero = Vec::with_capacity(primes.len());
        for &p in &primes {
            let (pp, pm, _) = model.local_law(p);
            plus.push(probability_threshold(pp));
            nonzero.push(probability_threshold(pp + pm));
        }
        let log_plus = primes.iter().map(|&p| -(-1.0 / p as f64).ln_1p()).collect();
        let log_minus = primes.iter().map(|&p| -(1.0 / p as f64).ln_1p()).collect();
        Ok(EulerSampler {
            model,
            primes,
            plus,
            nonzero,
            log_plus,
            log_minus,
        })
    }

    pub fn model(&self) -> &RandomEulerModel {
        &self.model
    }

    /// `log L` for the draw keyed by `seed`.
    pub fn sample_log(&self, seed: u64) -> f64 {
        if self.model.kind == ModelKind::Degenerate {
            return 0.0;
        }
        let key = rng::mix64(seed);
        let mut acc = 0.0;
        for j in 0..self.primes.len() {
            let r = rng::draw(key, j as u64);
            if r < self.plus[j] {
                acc += self.log_plus[j];
            } else if r < self.nonzero[j] {
                acc += self.log_minus[j];
            }
        }
        acc
    }

    /// One draw of the truncated product, keyed by `seed`.
    pub fn sample(&self, seed: u64) -> f64 {
        self.sample_log(seed).exp()
    }

    /// Exact mean and variance of `log L` under the truncated model.
    pub fn log_mean_variance(&self) -> (f64, f64) {
        let mut mean = Neumaier::default();
        let mut var = Neumaier::default();
        for (j, &p) in self.primes.iter().enumerate() {
            let (pp, pm, _) = self.model.local_law(p);
            let (a, b) = (self.log_plus[j], self.log_minus[j]);
            let m = pp * a + pm * b;
            mean.add(m);
            var.add(pp * a * a + pm * b * b - m * m);
        }
        (mean.value(), var.value())
    }

    /// Runs `n` draws derived from `seed` and averages `stats` statistics
    /// computed by `f(L, out)`. Results are identical for every execution
    /// mode and thread count.
    pub fn estimate<F>(
        &self,
        n: u64,
        seed: u64,
        exec: Execution,
        stats: usize,
        f: F,
    ) -> Vec<Estimate>
    where
        F: Fn(f64, &mut [f64]) + Sync + Send,
    {
        let blocks = n.div_ceil(BLOCK_SIZE as u64) as usize;
        let partial = map_indexed(exec, blocks, |b| {
            let start = b as u64 * BLOCK_SIZE as u64;
            let end = (start + BLOCK_SIZE as u64).min(n);
            let mut acc = vec![Welford::default(); stats];
            let mut out = vec![0.0; stats];
            for i in start..end {
                let l = self.sample(rng::stream_key(seed, i));
                f(l, &mut out);
                for (a, &v) in acc.iter_mut().zip(&out) {
                    a.push(v);
                }
            }
            acc
        });
        let mut total = vec![Welford::default(); stats];
        for block in &partial {
            for (t, b) in total.iter_mut().zip(block) {
                t.merge(b);
            }
        }
        total.iter().map(Welford::estimate).collect()
    }

    pub fn estimate_one<F>(&self, n: u64, seed: u64, exec: Execution, f: F) -> Estimate
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        self.estimate(n, seed, exec, 1, |l, out| out[0] = f(l))[0]
    }

    /// Monte Carlo `E(min(π²H²/L², X))`; `x_cap` may be infinite.
    pub fn expect_min(
        &self,
        h: u64,
        x_cap: f64,
        n: u64,
        seed: u64,
        exec: Execution,
    ) -> Result<Estimate> {
        check_min_args(h, x_cap, n)?;
        let k = (PI * h as f64).powi(2);
        Ok(self.estimate_one(n, seed, exec, |l| (k / (l * l)).min(x_cap)))
    }

    /// Monte Carlo `P(L ≤ π²/(6 e^γ τ))` for each `τ`.
    pub fn tail_probabilities(
        &self,
        taus: &[f64],
        n: u64,
        seed: u64,
        exec: Execution,
    ) -> Result<Vec<Estimate>> {
        if let Some(t) = taus.iter().find(|&&t| !(t >= 1.0)) {
            return Err(Error::invalid(format!("tau must be >= 1, got {t}")));
        }
        if n == 0 {
            return Err(Error::invalid("need at least one sample"));
        }
        let thresholds: Vec<f64> = taus.iter().map(|&t| small_value_threshold(t)).collect();
        Ok(self.estimate(n, seed, exec, taus.len(), |l, out| {
            for (o, &t) in out.iter_mut().zip(&thresholds) {
                *o = if l <= t { 1.0 } else { 0.0 };
            }
        }))
    }
}

/// `π²/(6 e^γ τ)`.
pub fn small_value_threshold(tau: f64) -> f64 {
    let c = Constants::get();
    c.pi * c.pi / (6.0 * c.euler_gamma.exp() * tau)
}

fn check_min_args(h: u64, x_cap: f64, n: u64) -> Result<()> {
    if h == 0 {
        return Err(Error::invalid("H must be positive"));
    }
    if !(x_cap >= 1.0) {
        return Err(Error::invalid(format!("X must be >= 1, got {x_cap}")));
    }
    if n < 1000 {
        return Err(Error::invalid(format!(
            "need at least 1000 samples, got {n}"
        )));
    }
    Ok(())
}

/// One draw of the truncated product, keyed by `seed`.
pub fn sample_l(model: &RandomEulerModel, seed: u64) -> Result<f64> {
    Ok(EulerSampler::new(*model)?.sample(seed))
}

/// Monte Carlo `E(min(π²H²/L(1,𝕏)², X))` with standard error.
pub fn expect_min(
    h: u64,
    x_cap: f64,
    model: &RandomEulerModel,
    n: u64,
    seed: u64,
) -> Result<Estimate> {
    check_min_args(h, x_cap, n)?;
    EulerSampler::new(*model)?.expect_min(h, x_cap, n, seed, Execution::default())
}

/// Monte Carlo `P(L ≤ π²/(6 e^γ τ))` with standard error.
pub fn tail_probability(tau: f64, model: &RandomEulerModel, n: u64, seed: u64) -> Result<Estimate> {
    Ok(EulerSampler::new(*model)?.tail_probabilities(&[tau], n, seed, Execution::default())?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn local_laws_sum_to_one() {
        for kind in [ModelKind::X, ModelKind::Y, ModelKind::Degenerate] {
            let m = RandomEulerModel::new(kind, 1000);
            for p in [2, 3, 5, 101, 997] {
                let (a, b, z) = m.local_law(p);
                assert!((a + b + z - 1.0).abs() < 1e-15);
                // E Z = 0, E Z² ≤ 1
                assert!((a - b).abs() < 1e-15);
                assert!(a + b <= 1.0);
            }
        }
        let (a, b, _) = RandomEulerModel::x(10).local_law(7);
        assert!((a + b - 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn local_factor_examples() {
        let x = RandomEulerModel::x(1000);
        let y = RandomEulerModel::y(1000);
        for p in [2, 3, 7] {
            assert!((local_factor(p, c(0.0, 0.0), &x).unwrap() - 1.0).norm() < 1e-15);
            assert!((local_factor(p, c(0.0, 0.0), &y).unwrap() - 1.0).norm() < 1e-15);
        }
        assert!((local_factor(2, c(-2.0, 0.0), &x).unwrap() - 7.0 / 6.0).norm() < 1e-15);
        assert!((local_factor(5, c(-2.0, 0.0), &x).unwrap() - 31.0 / 30.0).norm() < 1e-15);
        assert!(local_factor(4, c(1.0, 0.0), &x).is_err());
        assert!(local_factor(5, c(65.0, 0.0), &x).is_err());
    }

    #[test]
    fn log_factor_agrees_with_factor() {
        let x = RandomEulerModel::x(1000);
        for p in [2, 3, 11, 997] {
            for s in [c(-2.0, 0.0), c(0.5, 3.0), c(-7.0, -1.0), c(1e-9, 0.0)] {
                let direct = local_factor(p, s, &x).unwrap();
                let via_log = log_local_factor(ModelKind::X, p, s).exp();
                assert!((direct - via_log).norm() < 1e-14 * direct.norm());
            }
        }
    }

    #[test]
    fn second_order_local_bound() {
        // |factor − 1| ≤ C|s|²/p² for real |s| ≤ 4, p ≥ 11; C = 2 covers the
        // leading s(s+1)/2 term for |s| ≤ 4 with room for the quartic terms
        let x = RandomEulerModel::x(1000);
        for p in [11, 13, 101, 997] {
            for s in [-4.0, -2.5, -1.0, 0.5, 2.0, 4.0] {
                let f = local_factor(p, c(s, 0.0), &x).unwrap();
                assert!(
                    (f - 1.0).norm() <= 2.0 * s * s / (p * p) as f64,
                    "p={p} s={s}"
                );
            }
        }
    }

    #[test]
    fn series_coefficients_match_hand_expansion() {
        // Y: log E = s(s+1)/2 u² + ((s)_4/24 − (s(s+1)/2)²/2) u⁴ + ...
        let s = c(0.7, -1.3);
        let y = log_factor_series(ModelKind::Y, s, 6);
        let a = s * (s + 1.0) / 2.0;
        let b4 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) / 24.0;
        assert!((y[2] - a).norm() < 1e-14);
        assert!(y[3].norm() < 1e-15);
        assert!((y[4] - (b4 - a * a / 2.0)).norm() < 1e-14);
        // X: the factor 1/(1+u) gives u³ coefficient −a
        let x = log_factor_series(ModelKind::X, s, 6);
        assert!((x[2] - a).norm() < 1e-14);
        assert!((x[3] + a).norm() < 1e-14);
    }

    #[test]
    fn moment_at_zero_is_one() {
        let m = moment(c(0.0, 0.0), &RandomEulerModel::x(1000)).unwrap();
        assert_eq!(m.value, c(1.0, 0.0));
    }

    #[test]
    fn moment_telescopes_to_zeta_ratio() {
        let k = Constants::get();
        let target = k.zeta2 / k.zeta3;
        assert!((target - 1.368_433).abs() < 1e-6);
        let m = moment(c(-2.0, 0.0), &RandomEulerModel::x(100_000)).unwrap();
        assert!((m.value.re / target - 1.0).abs() < 1e-12, "{}", m.value);
        assert!(m.value.im.abs() < 1e-15);
    }

    #[test]
    fn moment_rejects_bad_configuration() {
        assert!(moment(c(1.0, 0.0), &RandomEulerModel::x(50)).is_err());
        assert!(moment(c(100.0, 0.0), &RandomEulerModel::x(1000)).is_err());
        assert!(moment(c(1.0, 0.0), &RandomEulerModel::x(1000).with_tail_order(3)).is_err());
    }

    #[test]
    fn tail_order_improves_accuracy() {
        let k = Constants::get();
        let target = k.zeta2 / k.zeta3;
        let errs: Vec<(f64, f64)> = (0..=2)
            .map(|o| {
                let m =
                    moment(c(-2.0, 0.0), &RandomEulerModel::x(1000).with_tail_order(o)).unwrap();
                ((m.value.re / target - 1.0).abs(), m.truncation_error_bound)
            })
            .collect();
        for &(err, bound) in &errs {
            assert!(err <= bound, "{err} > {bound}");
        }
        assert!(errs[0].0 > errs[1].0 && errs[1].0 > errs[2].0);
    }

    #[test]
    fn conjugate_symmetry() {
        let e = EulerMoments::new(RandomEulerModel::y(10_000)).unwrap();
        for s in [c(0.3, 2.0), c(-1.5, 0.7), c(4.0, -9.0)] {
            let a = e.moment(s).unwrap().value;
            let b = e.moment(s.conj()).unwrap().value;
            assert!((a - b.conj()).norm() < 1e-14 * a.norm());
        }
    }

    #[test]
    fn degenerate_model_samples_one() {
        let s = EulerSampler::new(RandomEulerModel::new(ModelKind::Degenerate, 1000)).unwrap();
        assert_eq!(s.sample(123), 1.0);
        assert_eq!(
            sample_l(&RandomEulerModel::new(ModelKind::Degenerate, 100), 9).unwrap(),
            1.0
        );
    }

    #[test]
    fn samples_are_deterministic() {
        let m = RandomEulerModel::x(10_000);
        assert_eq!(sample_l(&m, 77).unwrap(), sample_l(&m, 77).unwrap());
        assert_ne!(sample_l(&m, 77).unwrap(), sample_l(&m, 78).unwrap());
    }

    #[test]
    fn mean_log_l_matches_exact_mean() {
        let s = EulerSampler::new(RandomEulerModel::x(1000)).unwrap();
        let (mean, var) = s.log_mean_variance();
        let n = 100_000;
        let est = s.estimate_one(n, 5, Execution::default(), f64::ln);
        let se = (var / n as f64).sqrt();
        assert!(
            (est.mean - mean).abs() < 3.0 * se,
            "{} vs {mean} (se {se})",
            est.mean
        );
        assert!((est.std_error / se - 1.0).abs() < 0.05);
    }

    #[test]
    fn monte_carlo_negative_second_moment() {
        let model = RandomEulerModel::x(2000);
        let exact = moment(c(-2.0, 0.0), &model.with_tail_order(0)).unwrap();
        // tail_order 0 with cutoff 2000 is the exact truncated product the
        // sampler draws from
        let exact_truncated = {
            let primes = arith::primes_up_to(2000).unwrap();
            primes
                .iter()
                .map(|&p| local_factor(p, c(-2.0, 0.0), &model).unwrap().re)
                .product::<f64>()
        };
        assert!((exact.value.re - exact_truncated).abs() < 1e-13);
        let s = EulerSampler::new(model).unwrap();
        let est = s.estimate_one(200_000, 11, Execution::default(), |l| l.powi(-2));
        assert!((est.mean - exact_truncated).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn expect_min_guards() {
        let m = RandomEulerModel::x(100);
        assert!(expect_min(0, 10.0, &m, 1000, 1).is_err());
        assert!(expect_min(1, 0.5, &m, 1000, 1).is_err());
        assert!(expect_min(1, 10.0, &m, 999, 1).is_err());
        let e = expect_min(1, 2.0, &m, 1000, 1).unwrap();
        assert!(e.mean <= 2.0);
    }

    #[test]
    fn tail_probabilities_are_nested() {
        let s = EulerSampler::new(RandomEulerModel::x(1000)).unwrap();
        let p = s
            .tail_probabilities(&[1.0, 2.0, 3.0], 50_000, 3, Execution::default())
            .unwrap();
        assert!(p[0].mean > 0.0 && p[0].mean < 1.0);
        assert!(p[1].mean >= p[2].mean);
        assert!(s
            .tail_probabilities(&[0.5], 10, 3, Execution::default())
            .is_err());
        assert!((small_value_threshold(1.0) - 0.923_563_831_674_181_4).abs() < 1e-14);
    }

    #[test]
    fn estimates_do_not_depend_on_execution() {
        let s = EulerSampler::new(RandomEulerModel::y(500)).unwrap();
        let a = s
            .expect_min(10, 500.0, 10_000, 9, Execution::Sequential)
            .unwrap();
        let b = s
            .expect_min(10, 500.0, 10_000, 9, Execution::Parallel)
            .unwrap();
        assert_eq!(a, b);
    }
}
