//! Arithmetic primitives shared by every other module: the Kronecker symbol,
//! prime and fundamental-discriminant sieves, unit counts and the handful of
//! real constants (`ζ(2)`, `ζ(3)`, `γ`, `π`).

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::special;

/// Memory ceiling for table-building operations, in bytes.
///
/// Read from the `QUADFIELD_MEMORY_BUDGET` environment variable when set,
/// otherwise 2 GiB.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    pub bytes: u64,
}

impl MemoryBudget {
    pub const ENV_VAR: &'static str = "QUADFIELD_MEMORY_BUDGET";
    pub const DEFAULT_BYTES: u64 = 2 << 30;

    pub fn from_env() -> Self {
        let bytes = std::env::var(Self::ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<u64>().ok())
            .unwrap_or(Self::DEFAULT_BYTES);
        MemoryBudget { bytes }
    }

    pub fn check(&self, what: &'static str, needed: u64) -> Result<()> {
        if needed > self.bytes {
            Err(Error::Capacity {
                what,
                needed,
                budget: self.bytes,
            })
        } else {
            Ok(())
        }
    }
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self::from_env()
    }
}

/// A positive integer `d` such that `-d` is a fundamental discriminant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Discriminant(u64);

impl Discriminant {
    pub fn new(d: u64) -> Result<Self> {
        if is_fundamental(d) {
            Ok(Discriminant(d))
        } else {
            Err(Error::NotFundamental(d))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// The (negative) discriminant itself.
    pub fn signed(self) -> i64 {
        -(self.0 as i64)
    }
}

impl TryFrom<u64> for Discriminant {
    type Error = Error;

    fn try_from(d: u64) -> Result<Self> {
        Discriminant::new(d)
    }
}

impl std::fmt::Display for Discriminant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "-{}", self.0)
    }
}

/// Kronecker symbol `(a / n)`, defined for every integer `a` and `n ≥ 0`.
pub fn kronecker(a: i64, n: u64) -> i8 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut n = n;
    let mut sign = 1i8;
    let twos = n.trailing_zeros();
    if twos > 0 {
        if a & 1 == 0 {
            return 0;
        }
        // (a/2) = -1 exactly when a ≡ ±3 (mod 8)
        let a8 = a.rem_euclid(8);
        if twos & 1 == 1 && (a8 == 3 || a8 == 5) {
            sign = -sign;
        }
        n >>= twos;
    }
    let a_mod = (a as i128).rem_euclid(n as i128) as u64;
    sign * jacobi(a_mod, n)
}

/// Jacobi symbol `(a / n)` for odd `n ≥ 1`.
pub fn jacobi(a: u64, n: u64) -> i8 {
    debug_assert!(n & 1 == 1);
    let mut a = a % n;
    let mut n = n;
    let mut t = 1i8;
    while a != 0 {
        let z = a.trailing_zeros();
        a >>= z;
        if z & 1 == 1 && matches!(n & 7, 3 | 5) {
            t = -t;
        }
        if a & 3 == 3 && n & 3 == 3 {
            t = -t;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// Trial-division squarefree test.
pub fn is_squarefree(mut n: u64) -> bool {
    if n == 0 {
        return false;
    }
    if n % 4 == 0 {
        return false;
    }
    if n % 2 == 0 {
        n /= 2;
    }
    let mut p = 3u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return false;
            }
        }
        p += 2;
    }
    true
}

/// Whether `-d` is a fundamental discriminant.
pub fn is_fundamental(d: u64) -> bool {
    match d % 4 {
        3 => is_squarefree(d),
        0 => {
            let m = d / 4;
            matches!(m % 4, 1 | 2) && is_squarefree(m)
        }
        _ => false,
    }
}

/// Number of units `w` of `ℚ(√-d)`.
pub fn unit_count(d: u64) -> Result<u32> {
    if !is_fundamental(d) {
        return Err(Error::NotFundamental(d));
    }
    Ok(match d {
        3 => 6,
        4 => 4,
        _ => 2,
    })
}

fn check_bytes(what: &'static str, count: u64, width: u64) -> Result<()> {
    let needed = count.checked_mul(width).unwrap_or(u64::MAX);
    MemoryBudget::from_env().check(what, needed)
}

/// Sieve of Eratosthenes as a byte mask over `0..=x`.
fn prime_mask(x: u64) -> Result<Vec<bool>> {
    check_bytes("prime sieve", x + 1, 1)?;
    let n = x as usize;
    let mut mask = vec![true; n + 1];
    mask[0] = false;
    if n >= 1 {
        mask[1] = false;
    }
    let mut p = 2usize;
    while p * p <= n {
        if mask[p] {
            for m in (p * p..=n).step_by(p) {
                mask[m] = false;
            }
        }
        p += 1;
    }
    Ok(mask)
}

/// All primes `p ≤ x`, ascending.
pub fn primes_up_to(x: u64) -> Result<Vec<u64>> {
    if x < 2 {
        return Err(Error::invalid(format!(
            "primes_up_to needs x >= 2, got {x}"
        )));
    }
    let mask = prime_mask(x)?;
    Ok(mask
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| p.then_some(i as u64))
        .collect())
}

/// Primes `p ≤ x` with `p ≡ 3 (mod 4)`.
pub fn primes_3_mod_4(x: u64) -> Result<Vec<u64>> {
    Ok(primes_up_to(x)?
        .into_iter()
        .filter(|p| p % 4 == 3)
        .collect())
}

/// Byte mask over `0..=x`: entry `d` is true iff `-d` is fundamental.
///
/// One squarefree sieve over `0..=x` feeds every lookup.
pub fn fundamental_mask(x: u64) -> Result<Vec<bool>> {
    check_bytes("fundamental-discriminant sieve", x + 1, 2)?;
    let n = x as usize;
    let mut squarefree = vec![true; n + 1];
    squarefree[0] = false;
    let mut p = 2usize;
    while p * p <= n {
        // composite p have p² already covered by a prime factor's square
        let sq = p * p;
        for m in (sq..=n).step_by(sq) {
            squarefree[m] = false;
        }
        p += 1;
    }
    Ok((0..=n)
        .map(|d| match d % 4 {
            3 => squarefree[d],
            0 => {
                let m = d / 4;
                matches!(m % 4, 1 | 2) && squarefree[m]
            }
            _ => false,
        })
        .collect())
}

/// Real constants used throughout, evaluated once from series.
#[derive(Clone, Copy, Debug)]
pub struct Constants {
    pub zeta2: f64,
    pub zeta3: f64,
    pub euler_gamma: f64,
    pub pi: f64,
}

impl Constants {
    pub fn get() -> &'static Constants {
        static CONSTANTS: OnceLock<Constants> = OnceLock::new();
        CONSTANTS.get_or_init(|| Constants {
            zeta2: special::zeta(2.0),
            zeta3: special::zeta(3.0),
            euler_gamma: special::euler_gamma(),
            pi: std::f64::consts::PI,
        })
    }

    /// `3ζ(2)/ζ(3)`, the leading constant of `Σ_{h≤H} F(h)`.
    pub fn census_constant(&self) -> f64 {
        3.0 * self.zeta2 / self.zeta3
    }
}
