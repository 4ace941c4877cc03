//! Special functions: `ζ` via accelerated alternating series, the prime zeta
//! function, Euler's constant, and complex helpers (`expm1`, `ln(1+z)`,
//! generalized exponential integrals).

use num_complex::Complex64;

/// Dirichlet eta `η(s) = Σ (-1)^k / (k+1)^s` by the Cohen–Rodriguez Villegas–Zagier
/// acceleration; error about `5.8^-n`.
fn eta(s: f64) -> f64 {
    const N: i32 = 30;
    let mut d = (3.0 + 8f64.sqrt()).powi(N);
    d = (d + 1.0 / d) / 2.0;
    let mut b = -1.0;
    let mut c = -d;
    let mut sum = 0.0;
    for k in 0..N {
        c = b - c;
        sum += c / f64::from(k + 1).powf(s);
        let kf = f64::from(k);
        let nf = f64::from(N);
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    sum / d
}

/// Riemann zeta for real `s > 1`.
pub(crate) fn zeta(s: f64) -> f64 {
    eta(s) / (1.0 - 2f64.powf(1.0 - s))
}

/// `ζ(n) - 1` without cancellation for large `n`.
pub(crate) fn zeta_minus_one(n: u32) -> f64 {
    if n < 8 {
        return zeta(f64::from(n)) - 1.0;
    }
    // direct sum plus an Euler–Maclaurin tail from M on
    const M: u32 = 30;
    let nf = f64::from(n);
    let m = f64::from(M);
    let e = -(n as i32);
    let tail = m.powi(e + 1) / (nf - 1.0) + 0.5 * m.powi(e) + nf * m.powi(e - 1) / 12.0
        - nf * (nf + 1.0) * (nf + 2.0) * m.powi(e - 3) / 720.0;
    let head: f64 = (2..M).rev().map(|k| f64::from(k).powi(e)).sum();
    tail + head
}

fn mobius(mut n: u32) -> i32 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

/// Prime zeta `P(k) = Σ_p p^-k = Σ_n μ(n)/n · ln ζ(nk)` for integer `k ≥ 2`.
pub(crate) fn prime_zeta(k: u32) -> f64 {
    let mut terms = Vec::new();
    let mut n = 1u32;
    loop {
        let zm1 = zeta_minus_one(n * k);
        if zm1 < 1e-22 {
            break;
        }
        let mu = mobius(n);
        if mu != 0 {
            terms.push(f64::from(mu) / f64::from(n) * zm1.ln_1p());
        }
        n += 1;
    }
    // smallest first
    terms.iter().rev().sum()
}

/// Euler–Mascheroni constant by Euler–Maclaurin on the harmonic numbers.
pub(crate) fn euler_gamma() -> f64 {
    const N: u32 = 20;
    // B_2k for k = 1..=8
    const BERNOULLI: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let n = f64::from(N);
    let harmonic: f64 = (1..=N).rev().map(|k| 1.0 / f64::from(k)).sum();
    let correction: f64 = BERNOULLI
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let k = (i + 1) as i32;
            b / (2.0 * f64::from(k) * n.powi(2 * k))
        })
        .rev()
        .sum();
    harmonic - n.ln() - 0.5 / n + correction
}

/// `e^z - 1` accurate for small `|z|`.
pub(crate) fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let em1 = x.exp_m1();
    let cos_m1 = -2.0 * (0.5 * y).sin().powi(2);
    Complex64::new(em1 * y.cos() + cos_m1, x.exp() * y.sin())
}

/// Principal `ln(1 + w)` accurate for small `|w|`.
pub(crate) fn ln1p(w: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p();
    let im = w.im.atan2(1.0 + w.re);
    Complex64::new(re, im)
}

/// Generalized exponential integral `E_n(z) = ∫_1^∞ e^{-zt} t^{-n} dt`,
/// analytically continued to `|arg z| < π`, for `n ≥ 2`.
pub(crate) fn expint_e(n: u32, z: Complex64) -> Complex64 {
    debug_assert!(n >= 2);
    const EPS: f64 = 1e-16;
    const MAX_ITER: u32 = 100_000;
    let nf = f64::from(n);
    if z.norm() == 0.0 {
        return Complex64::new(1.0 / (nf - 1.0), 0.0);
    }
    if z.norm() > 1.0 {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = z + nf;
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 1..MAX_ITER {
            let fi = f64::from(i);
            let an = -fi * (nf - 1.0 + fi);
            b += 2.0;
            d = (d * an + b).inv();
            c = b + c.inv() * an;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < EPS {
                break;
            }
        }
        h * (-z).exp()
    } else {
        let nm1 = n - 1;
        let gamma = euler_gamma();
        let mut ans = Complex64::new(1.0 / f64::from(nm1), 0.0);
        let mut fact = Complex64::new(1.0, 0.0);
        for i in 1..MAX_ITER {
            let fi = f64::from(i);
            fact *= -z / fi;
            let del = if i != nm1 {
                -fact / (fi - f64::from(nm1))
            } else {
                let psi = -gamma + (1..=nm1).map(|k| 1.0 / f64::from(k)).sum::<f64>();
                fact * (-z.ln() + psi)
            };
            ans += del;
            if del.norm() < ans.norm() * EPS && i > nm1 {
                break;
            }
        }
        ans
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((zeta(2.0) / (pi2 / 6.0) - 1.0).abs() < 1e-15);
        assert!((zeta(4.0) / (pi2 * pi2 / 90.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zeta3_against_apery_series() {
        // ζ(3) = 5/2 Σ (-1)^{k+1} / (k³ C(2k,k))
        let mut sum = 0.0;
        let mut binom = 1.0;
        for k in 1..40u32 {
            let kf = f64::from(k);
            binom *= (2.0 * kf - 1.0) * (2.0 * kf) / (kf * kf);
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign / (kf.powi(3) * binom);
        }
        assert!((zeta(3.0) / (2.5 * sum) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zeta_minus_one_is_smooth_across_switch() {
        for n in 2..40 {
            let direct: f64 = (2..100_000u32)
                .rev()
                .map(|m| f64::from(m).powi(-(n as i32)))
                .sum();
            if n >= 4 {
                let rel = (zeta_minus_one(n) / direct - 1.0).abs();
                assert!(rel < 1e-13, "n={n} rel={rel:e}");
            }
        }
    }

    #[test]
    fn prime_zeta_two() {
        // P(2) = 0.45224742004106549850...
        assert!((prime_zeta(2) - 0.452_247_420_041_065_5).abs() < 1e-15);
        // P(3) = 0.17476263929944353642...
        assert!((prime_zeta(3) - 0.174_762_639_299_443_5).abs() < 1e-15);
    }

    #[test]
    fn mobius_small() {
        let mu: Vec<i32> = (1..=10).map(mobius).collect();
        assert_eq!(mu, vec![1, -1, -1, 0, -1, 1, -1, 0, 0, 1]);
    }

    #[test]
    fn expm1_and_ln1p_small_arguments() {
        let z = Complex64::new(1e-12, -2e-12);
        let e = expm1(z);
        assert!((e - z).norm() < 1e-23);
        let l = ln1p(z);
        assert!((l - z).norm() < 1e-23);
        let w = Complex64::new(0.3, -1.2);
        assert!((expm1(w) - (w.exp() - 1.0)).norm() < 1e-15);
        assert!((ln1p(w) - (w + 1.0).ln()).norm() < 1e-15);
    }

    fn expint_quadrature(n: u32, x: f64) -> f64 {
        // ∫_1^∞ e^{-xt} t^{-n} dt via u = 1/t: ∫_0^1 e^{-x/u} u^{n-2} du, Simpson
        let m = 200_000;
        let h = 1.0 / m as f64;
        let f = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                (-x / u).exp() * u.powi(n as i32 - 2)
            }
        };
        let mut s = f(0.0) + f(1.0);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn expint_matches_quadrature_on_real_axis() {
        for &n in &[2u32, 3, 6] {
            for &x in &[0.01, 0.5, 0.99, 1.01, 3.0, 20.0] {
                let q = expint_quadrature(n, x);
                let e = expint_e(n, Complex64::new(x, 0.0));
                assert!(
                    (e.re - q).abs() < 1e-10 * q.max(1e-30),
                    "n={n} x={x}: {} vs {q}",
                    e.re
                );
                assert!(e.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn expint_recurrence_off_axis() {
        // n E_{n+1}(z) = e^{-z} - z E_n(z)
        let pts = [
            Complex64::new(0.3, 0.4),
            Complex64::new(-0.2, -0.7),
            Complex64::new(-0.01, -120.0),
            Complex64::new(0.05, 35.0),
            Complex64::new(-3.0, 2.5),
            Complex64::new(-0.5, 0.9),
        ];
        for z in pts {
            for n in 2..7u32 {
                let lhs = expint_e(n + 1, z) * f64::from(n);
                let rhs = (-z).exp() - z * expint_e(n, z);
                assert!(
                    (lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()),
                    "n={n} z={z}"
                );
            }
        }
    }
}
