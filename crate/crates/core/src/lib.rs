//! Class numbers of imaginary quadratic fields and the analytic objects used
//! to study their average: the census `F(h)`, random Euler products, the
//! smoothed Perron kernel and the negative moments of `h(-d)`.
//!
//! The heavy loops (the reduced-form sieve, Monte Carlo sampling, kernel
//! sweeps) run on rayon when the `parallel` feature is enabled and fall back
//! to plain iterators otherwise. Every parallel reduction merges in a fixed
//! order, so results are bit-identical for any thread or lane count.

pub mod arith;
pub mod census;
pub mod classnum;
mod error;
pub mod par;
pub mod perron;
pub mod pipeline;
pub mod randeuler;
pub mod rng;
mod special;
mod sum;

pub use error::{Error, Result};
pub use par::Execution;
