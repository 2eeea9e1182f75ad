//! Counter-based pseudo-random numbers.
//!
//! The generator is fully specified here so fixtures can be reproduced in any
//! language:
//!
//! ```text
//! GOLDEN  = 0x9E3779B97F4A7C15
//! mix(z)  = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!           z ^= z >> 27; z *= 0x94D049BB133111EB;
//!           z ^ (z >> 31)                       (wrapping u64 arithmetic)
//! key(seed, stream)   = mix(seed ^ mix(stream + GOLDEN))
//! word(key, counter)  = mix(key + (counter + 1) * GOLDEN)
//! uniform(key, c)     = (word(key, c) >> 11) * 2^-53       in [0, 1)
//! ```
//!
//! The i-th draw of a stream is `word(key, i)`; streams are independent
//! given distinct `stream` ids, which makes row-parallel sampling and
//! bootstrap replicates independent of scheduling.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the key of sub-stream `stream` under `seed`.
#[inline]
pub fn derive_key(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    pub fn for_stream(seed: u64, stream: u64) -> Self {
        CounterRng::new(derive_key(seed, stream))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift; the tiny bias is
    /// irrelevant at the table sizes used here).
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Index drawn from a discrete distribution by inverse CDF.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (k, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // rounding left u above the final partial sum; take the last
        // category with positive mass
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }
}
