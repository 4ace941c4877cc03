//! Class numbers `h(-d)` of imaginary quadratic fields.
//!
//! Two independent routes are provided: counting reduced binary quadratic
//! forms, and the finite character-sum form of Dirichlet's class number
//! formula. [`batch_class_numbers`] fills a whole table at once by walking
//! every reduced form with discriminant magnitude up to `X`.

use std::f64::consts::PI;
use std::io::{self, Read, Write};

use crate::arith::{self, kronecker, unit_count, Discriminant, MemoryBudget};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};

/// A positive definite form `ax² + bxy + cy²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ReducedForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl ReducedForm {
    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn is_reduced(&self) -> bool {
        let ReducedForm { a, b, c } = *self;
        a > 0 && -a < b && b <= a && a <= c && (a != c || b >= 0)
    }
}

/// All reduced forms of discriminant `-d`, ordered by `(a, b)`.
pub fn reduced_forms(d: u64) -> Vec<ReducedForm> {
    let d = d as i64;
    let mut forms = Vec::new();
    let mut a = 1i64;
    while 3 * a * a <= d {
        for b in (-a + 1)..=a {
            if (b - d) & 1 != 0 {
                continue;
            }
            let num = b * b + d;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a || (c == a && b < 0) {
                continue;
            }
            forms.push(ReducedForm { a, b, c });
        }
        a += 1;
    }
    forms
}

/// `h(-d)` by counting reduced forms.
pub fn class_number_forms(d: u64) -> Result<u32> {
    Discriminant::new(d)?;
    Ok(reduced_forms(d).len() as u32)
}

const UNSET: i8 = 2;

/// `h(-d)` from `h = (2 - χ(2))⁻¹ Σ_{0<a<d/2} χ(a)`, with `χ = (-d / ·)`.
pub fn class_number_charsum(d: u64) -> Result<u32> {
    let disc = Discriminant::new(d)?;
    if d <= 4 {
        return Ok(1);
    }
    let big_d = disc.signed();
    // χ is completely multiplicative: evaluate it on primes, extend by a linear sieve
    let n = ((d - 1) / 2) as usize;
    let mut chi = vec![UNSET; n + 1];
    chi[1] = 1;
    let mut primes = Vec::new();
    for i in 2..=n {
        if chi[i] == UNSET {
            chi[i] = kronecker(big_d, i as u64);
            primes.push(i);
        }
        for &p in &primes {
            let m = i * p;
            if m > n {
                break;
            }
            chi[m] = chi[i] * chi[p];
            if i % p == 0 {
                break;
            }
        }
    }
    let sum: i64 = chi[1..].iter().map(|&c| i64::from(c)).sum();
    let denom = 2 - i64::from(kronecker(big_d, 2));
    if sum <= 0 || sum % denom != 0 {
        return Err(Error::Inconsistent(format!(
            "character sum {sum} for -{d} is not a positive multiple of {denom}"
        )));
    }
    Ok((sum / denom) as u32)
}

/// `L(1, χ_{-d}) = 2π h(-d) / (w √d)`.
pub fn l_one_chi(d: u64) -> Result<f64> {
    let h = class_number_forms(d)?;
    l_one_chi_from(d, h)
}

/// Same as [`l_one_chi`] with a class number already at hand.
pub fn l_one_chi_from(d: u64, h: u32) -> Result<f64> {
    let w = unit_count(d)?;
    Ok(2.0 * PI * f64::from(h) / (f64::from(w) * (d as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuildMethod {
    BatchSieve,
    PerDiscriminant,
}

impl BuildMethod {
    fn code(self) -> u32 {
        match self {
            BuildMethod::BatchSieve => 0,
            BuildMethod::PerDiscriminant => 1,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(BuildMethod::BatchSieve),
            1 => Some(BuildMethod::PerDiscriminant),
            _ => None,
        }
    }
}

/// `h(-d)` for every fundamental `d ≤ X`; other indices hold 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassNumberTable {
    x: u64,
    values: Vec<u32>,
    build_method: BuildMethod,
    checksum: u64,
}

impl ClassNumberTable {
    fn from_values(x: u64, values: Vec<u32>, build_method: BuildMethod) -> Self {
        let checksum = values.iter().map(|&h| u64::from(h)).sum();
        ClassNumberTable {
            x,
            values,
            build_method,
            checksum,
        }
    }

    /// Builds the table one discriminant at a time with [`class_number_forms`].
    pub fn per_discriminant(x: u64) -> Result<Self> {
        if x < 3 {
            return Err(Error::invalid(format!(
                "table cutoff must be >= 3, got {x}"
            )));
        }
        MemoryBudget::from_env().check("class number table", (x + 1) * 4)?;
        let mask = arith::fundamental_mask(x)?;
        let values = (0..=x)
            .map(|d| {
                if mask[d as usize] {
                    reduced_forms(d).len() as u32
                } else {
                    0
                }
            })
            .collect();
        Ok(Self::from_values(x, values, BuildMethod::PerDiscriminant))
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn build_method(&self) -> BuildMethod {
        self.build_method
    }

    /// Sum of all stored class numbers.
    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    /// `h(-d)` if `d ≤ X` and `-d` is fundamental.
    pub fn get(&self, d: u64) -> Option<u32> {
        match self.values.get(d as usize) {
            Some(&h) if h > 0 => Some(h),
            _ => None,
        }
    }

    /// `(d, h(-d))` over fundamental `d ≤ X`, ascending in `d`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &h)| h > 0)
            .map(|(d, &h)| (d as u64, h))
    }

    /// Same as [`Self::iter`] restricted to `d ≤ limit`.
    pub fn iter_up_to(&self, limit: u64) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.iter().take_while(move |&(d, _)| d <= limit)
    }

    pub fn fundamental_count(&self) -> u64 {
        self.iter().count() as u64
    }

    /// Raw values for `d = 1..=X`.
    pub fn values(&self) -> &[u32] {
        &self.values[1..]
    }

    const MAGIC: [u8; 8] = *b"QFHTABLE";
    const VERSION: u32 = 1;

    /// Binary dump: 16-byte header (magic, version, build method), `X` as
    /// little-endian u64, then `h(-d)` for `d = 1..=X` as little-endian u32.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&self.build_method.code().to_le_bytes())?;
        w.write_all(&self.x.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for h in &self.values[1..] {
            buf.extend_from_slice(&h.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::invalid(format!("malformed class number table: {m}"));
        let mut header = [0u8; 24];
        r.read_exact(&mut header).map_err(|_| bad("short header"))?;
        if header[..8] != Self::MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != Self::VERSION {
            return Err(bad("unsupported version"));
        }
        let method = BuildMethod::from_code(u32::from_le_bytes(header[12..16].try_into().unwrap()))
            .ok_or_else(|| bad("unknown build method"))?;
        let x = u64::from_le_bytes(header[16..24].try_into().unwrap());
        MemoryBudget::from_env().check("class number table", (x + 1).saturating_mul(4))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body).map_err(|_| bad("short body"))?;
        if body.len() as u64 != x * 4 {
            return Err(bad("body length does not match X"));
        }
        let mut values = Vec::with_capacity(x as usize + 1);
        values.push(0);
        values.extend(
            body.chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap())),
        );
        Ok(Self::from_values(x, values, method))
    }
}

/// Sieve lane `lane` of `lanes`: counts reduced forms with leading
/// coefficient `a ≡ lane + 1 (mod lanes)` into `bucket[4ac - b²]`.
fn sieve_lane(x: u64, lane: usize, lanes: usize, bucket: &mut [u32]) {
    let x = x as i64;
    let mut a = lane as i64 + 1;
    while 3 * a * a <= x {
        let step = (4 * a) as usize;
        for b in (-a + 1)..=a {
            let c_min = if b < 0 { a + 1 } else { a };
            let start = 4 * a * c_min - b * b;
            if start > x {
                continue;
            }
            for idx in (start as usize..=x as usize).step_by(step) {
                bucket[idx] += 1;
            }
        }
        a += lanes as i64;
    }
}

/// Class numbers for every fundamental `d ≤ x` by the reduced-form sieve.
///
/// The outer loop over the leading coefficient is split into `lanes`
/// interleaved slices, each with a private bucket array; buckets are merged
/// in lane order, so the result does not depend on `lanes` or on scheduling.
pub fn batch_class_numbers(x: u64, lanes: usize) -> Result<ClassNumberTable> {
    batch_class_numbers_with(x, lanes, Execution::default())
}

pub fn batch_class_numbers_with(x: u64, lanes: usize, exec: Execution) -> Result<ClassNumberTable> {
    if lanes == 0 {
        return Err(Error::invalid("lane count must be positive"));
    }
    if x < 3 {
        return Err(Error::invalid(format!(
            "table cutoff must be >= 3, got {x}"
        )));
    }
    let buckets = if exec.is_parallel() {
        lanes as u64 + 1
    } else {
        1
    };
    let needed = (x + 1)
        .saturating_mul(4)
        .saturating_mul(buckets)
        .saturating_add((x + 1).saturating_mul(2));
    MemoryBudget::from_env().check("reduced-form sieve", needed)?;

    let len = x as usize + 1;
    let mut values = if exec.is_parallel() {
        let partial = map_indexed(exec, lanes, |lane| {
            let mut bucket = vec![0u32; len];
            sieve_lane(x, lane, lanes, &mut bucket);
            bucket
        });
        let mut merged = vec![0u32; len];
        for bucket in &partial {
            for (m, v) in merged.iter_mut().zip(bucket) {
                *m += v;
            }
        }
        merged
    } else {
        let mut merged = vec![0u32; len];
        for lane in 0..lanes {
            sieve_lane(x, lane, lanes, &mut merged);
        }
        merged
    };

    let mask = arith::fundamental_mask(x)?;
    for (v, &fundamental) in values.iter_mut().zip(&mask) {
        if !fundamental {
            *v = 0;
        }
    }
    Ok(ClassNumberTable::from_values(
        x,
        values,
        BuildMethod::BatchSieve,
    ))
}
