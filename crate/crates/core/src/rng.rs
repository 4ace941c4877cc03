//! Counter-based random bits.
//!
//! A draw is a pure function of `(key, counter)`, so any subset of draws can
//! be produced in any order, on any thread, with identical results. The
//! mixing function is the SplitMix64 finalizer applied to a Weyl sequence,
//! which is exactly the SplitMix64 stream seeded with `key`.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The `counter`-th output of the stream keyed by `key`.
#[inline]
pub fn draw(key: u64, counter: u64) -> u64 {
    mix64(key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Key of the `index`-th independent stream derived from `seed`.
#[inline]
pub fn stream_key(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_mul(GOLDEN_GAMMA) ^ 0x5851_f42d_4c95_7f2d))
}

/// Sequential view of one keyed stream.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = draw(self.key, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
