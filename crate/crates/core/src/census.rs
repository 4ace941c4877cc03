//! The census `F_X(h) = #{fundamental d ≤ X : h(-d) = h}` and the averaged
//! asymptotics `Σ_{h≤H} F(h) ~ 3ζ(2)/ζ(3)·H²` and
//! `Σ_{h≤H, h odd} F(h) ~ (15/4)·H²/log H`.
//!
//! The true `F(h)` needs every field with class number `h`; no effective
//! cutoff on `d` is known. Counts here are exact for the table's `X` and the
//! census carries a flag saying whether `X` reaches `H² log log H`.

use crate::arith::Constants;
use crate::classnum::{batch_class_numbers, ClassNumberTable};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};

/// Smallest `H` for which `log log H > 1` is comfortably true.
pub const MIN_ASYMPTOTIC_H: u64 = 16;

/// `X = ceil(H² · max(log log H, 1))`, natural logarithms.
pub fn reduction_cutoff(h: u64) -> u64 {
    let hf = h as f64;
    let loglog = if h >= 3 { hf.ln().ln().max(1.0) } else { 1.0 };
    (hf * hf * loglog).ceil() as u64
}

/// Cutoff a table must reach for a census up to `H` to count as
/// heuristically complete. Below [`MIN_ASYMPTOTIC_H`] the reduction cutoff is
/// meaningless (it would call `X = 1` complete for `H = 1`), so small `H` are
/// held to the cutoff at `H = 16`.
pub fn completeness_cutoff(h: u64) -> u64 {
    reduction_cutoff(h.max(MIN_ASYMPTOTIC_H))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FCensus {
    h_max: u64,
    x: u64,
    counts: Vec<u64>,
    heuristically_complete: bool,
}

impl FCensus {
    pub fn h_max(&self) -> u64 {
        self.h_max
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn heuristically_complete(&self) -> bool {
        self.heuristically_complete
    }

    /// `F_X(h)`; zero for class numbers never observed.
    pub fn count(&self, h: u64) -> u64 {
        self.counts.get(h as usize).copied().unwrap_or(0)
    }

    /// Counts indexed by `h`, index 0 unused, up to the largest observed `h`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Largest class number in the table.
    pub fn largest_h(&self) -> u64 {
        self.counts.len().saturating_sub(1) as u64
    }

    pub fn sum_up_to(&self, h: u64) -> u64 {
        self.counts.iter().take(h as usize + 1).sum()
    }

    pub fn odd_sum_up_to(&self, h: u64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .take(h as usize + 1)
            .filter(|(k, _)| k % 2 == 1)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Tabulates `F_X(h)` for every class number in `table`.
pub fn tabulate(table: &ClassNumberTable, h_max: u64) -> Result<FCensus> {
    if h_max == 0 {
        return Err(Error::invalid("H must be positive"));
    }
    let mut counts = vec![0u64; 1];
    for (_, h) in table.iter() {
        let h = h as usize;
        if h >= counts.len() {
            counts.resize(h + 1, 0);
        }
        counts[h] += 1;
    }
    Ok(FCensus {
        h_max,
        x: table.x(),
        counts,
        heuristically_complete: table.x() >= completeness_cutoff(h_max),
    })
}

/// Fundamental `d ≤ x` whose class number is odd, ascending.
pub fn odd_class_number_discriminants(table: &ClassNumberTable, x: u64) -> Vec<u64> {
    table
        .iter_up_to(x)
        .filter(|&(_, h)| h % 2 == 1)
        .map(|(d, _)| d)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticRow {
    pub h: u64,
    pub x: u64,
    pub empirical: u64,
    pub main_term: f64,
    pub ratio: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticReport {
    pub target_constant: f64,
    pub rows: Vec<AsymptoticRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theorem {
    /// All class numbers: main term `3ζ(2)/ζ(3)·H²`.
    AllClassNumbers,
    /// Odd class numbers: main term `(15/4)·H²/log H`.
    OddClassNumbers,
}

impl Theorem {
    pub fn target_constant(self) -> f64 {
        match self {
            Theorem::AllClassNumbers => Constants::get().census_constant(),
            Theorem::OddClassNumbers => 15.0 / 4.0,
        }
    }

    pub fn main_term(self, h: u64) -> f64 {
        let hf = h as f64;
        match self {
            Theorem::AllClassNumbers => self.target_constant() * hf * hf,
            Theorem::OddClassNumbers => self.target_constant() * hf * hf / hf.ln(),
        }
    }
}

fn checked_grid(h_grid: &[u64]) -> Result<Vec<u64>> {
    if h_grid.is_empty() {
        return Err(Error::invalid("empty H grid"));
    }
    if let Some(&h) = h_grid.iter().find(|&&h| h < MIN_ASYMPTOTIC_H) {
        return Err(Error::invalid(format!(
            "H = {h} is below {MIN_ASYMPTOTIC_H}, where log log H < 1"
        )));
    }
    let mut grid = h_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    Ok(grid)
}

/// Builds one table reaching the largest cutoff on the grid and evaluates
/// every grid point against it.
pub fn verify(theorem: Theorem, h_grid: &[u64], lanes: usize) -> Result<AsymptoticReport> {
    let grid = checked_grid(h_grid)?;
    let x_max = reduction_cutoff(*grid.last().unwrap());
    let table = batch_class_numbers(x_max, lanes)?;
    verify_with_table(theorem, &grid, &table)
}

pub fn verify_theorem1(h_grid: &[u64], lanes: usize) -> Result<AsymptoticReport> {
    verify(Theorem::AllClassNumbers, h_grid, lanes)
}

pub fn verify_theorem2(h_grid: &[u64], lanes: usize) -> Result<AsymptoticReport> {
    verify(Theorem::OddClassNumbers, h_grid, lanes)
}

/// Like [`verify`], using an existing table that reaches every cutoff.
pub fn verify_with_table(
    theorem: Theorem,
    h_grid: &[u64],
    table: &ClassNumberTable,
) -> Result<AsymptoticReport> {
    let grid = checked_grid(h_grid)?;
    let needed = reduction_cutoff(*grid.last().unwrap());
    if table.x() < needed {
        return Err(Error::invalid(format!(
            "table reaches X = {}, grid needs {needed}",
            table.x()
        )));
    }
    let rows = map_indexed(Execution::default(), grid.len(), |i| {
        let h = grid[i];
        let x = reduction_cutoff(h);
        let empirical = table
            .iter_up_to(x)
            .filter(|&(_, k)| {
                let k = u64::from(k);
                k <= h && (theorem == Theorem::AllClassNumbers || k % 2 == 1)
            })
            .count() as u64;
        let main_term = theorem.main_term(h);
        AsymptoticRow {
            h,
            x,
            empirical,
            main_term,
            ratio: empirical as f64 / main_term,
            residual: empirical as f64 - main_term,
        }
    });
    Ok(AsymptoticReport {
        target_constant: theorem.target_constant(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith;

    const CLASS_NUMBER_ONE: [u64; 9] = [3, 4, 7, 8, 11, 19, 43, 67, 163];

    #[test]
    fn cutoffs() {
        assert_eq!(reduction_cutoff(1), 1);
        assert_eq!(reduction_cutoff(10), 100);
        // 100² · ln ln 100 = 15271.796...
        assert_eq!(reduction_cutoff(100), 15_272);
        assert_eq!(completeness_cutoff(1), reduction_cutoff(16));
        assert_eq!(completeness_cutoff(400), reduction_cutoff(400));
    }

    #[test]
    fn class_number_one() {
        let t = batch_class_numbers(10_000, 2).unwrap();
        let c = tabulate(&t, 1).unwrap();
        assert_eq!(c.count(1), 9);
        assert!(c.heuristically_complete());
        let ones: Vec<u64> = t.iter().filter(|&(_, h)| h == 1).map(|(d, _)| d).collect();
        assert_eq!(ones, CLASS_NUMBER_ONE);
    }

    #[test]
    fn class_number_two() {
        let t = batch_class_numbers(10_000, 1).unwrap();
        let c = tabulate(&t, 2).unwrap();
        assert_eq!(c.count(2), 18);
        assert_eq!(c.sum_up_to(2), 27);
        for (d, h) in t.iter().filter(|&(_, h)| h == 2) {
            assert_eq!(crate::classnum::class_number_charsum(d).unwrap(), h);
        }
    }

    #[test]
    fn small_cutoff_is_flagged() {
        let t = batch_class_numbers(163, 1).unwrap();
        let c = tabulate(&t, 1).unwrap();
        assert_eq!(c.count(1), 9);
        assert!(!c.heuristically_complete());
        assert!(tabulate(&t, 0).is_err());
    }

    #[test]
    fn totals_and_monotonicity() {
        let t = batch_class_numbers(50_000, 1).unwrap();
        let c = tabulate(&t, 100).unwrap();
        assert_eq!(c.total(), t.fundamental_count());
        let sums: Vec<u64> = (1..=c.largest_h()).map(|h| c.sum_up_to(h)).collect();
        assert!(sums.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*sums.last().unwrap(), c.total());
    }

    #[test]
    fn odd_counts_are_primes_three_mod_four() {
        let x = 10_000;
        let t = batch_class_numbers(x, 1).unwrap();
        let odd = odd_class_number_discriminants(&t, x);
        let mut expected = vec![3, 4, 7, 8];
        expected.extend(
            arith::primes_3_mod_4(x)
                .unwrap()
                .into_iter()
                .filter(|&p| p > 8),
        );
        assert_eq!(odd, expected);
        let c = tabulate(&t, 1000).unwrap();
        assert_eq!(c.odd_sum_up_to(c.largest_h()), expected.len() as u64);
    }

    #[test]
    fn report_shape() {
        let r = verify_theorem1(&[50, 20, 30], 1).unwrap();
        assert_eq!(
            r.rows.iter().map(|r| r.h).collect::<Vec<_>>(),
            vec![20, 30, 50]
        );
        for row in &r.rows {
            assert_eq!(row.x, reduction_cutoff(row.h));
            assert!((row.ratio - row.empirical as f64 / row.main_term).abs() < 1e-15);
            assert!((row.residual - (row.empirical as f64 - row.main_term)).abs() < 1e-9);
        }
        assert!((r.target_constant - 4.105_298).abs() < 1e-6);
        assert_eq!(verify_theorem2(&[20], 1).unwrap().target_constant, 3.75);
        assert!(verify_theorem1(&[15], 1).is_err());
        assert!(verify_theorem1(&[], 1).is_err());
    }
}
