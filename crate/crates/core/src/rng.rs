//! Seeded random streams with a fixed, documented algorithm.
//!
//! Every random decision in the crate (mutant targets, Gaussian noise,
//! shuffles, sampling, representative picks) draws from [`SplitMix64`] so
//! that runs can be replayed bit-for-bit on any platform and by external
//! tools. The algorithm is Steele, Lea and Flood's SplitMix64:
//!
//! ```text
//! state  <- state + 0x9E3779B97F4A7C15
//! z      <- state
//! z      <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z      <- (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output <- z ^ (z >> 31)
//! ```
//!
//! Derived quantities:
//!
//! * `next_f64`: `(next_u64 >> 11) * 2^-53`, uniform in `[0, 1)`.
//! * `below(n)`: rejection sampling on `next_u64` against the largest
//!   multiple of `n`, then `% n`.
//! * `gaussian`: one Box-Muller draw per call, `u1 = 1 - next_f64()`,
//!   `u2 = next_f64()`, `sqrt(-2 ln u1) * cos(2 pi u2)`.
//! * `shuffle`: Fisher-Yates from the back, `j = below(i + 1)`.
//! * `derive_seed(seed, stream)`: `mix(seed + mix(stream + GAMMA))`, used to
//!   split independent streams from one base seed.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(seed.wrapping_add(mix(stream.wrapping_add(GAMMA))))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let limit = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < limit {
                return v % n;
            }
        }
    }

    pub fn below_usize(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    /// Standard normal variate.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below_usize(i + 1);
            items.swap(i, j);
        }
    }
}
