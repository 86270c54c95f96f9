//! Counter-mode randomness.
//!
//! Every random quantity used by a sketch is a pure function of a master
//! seed and a tuple of integer coordinates, so coefficients are recomputed
//! on demand rather than stored.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a sequence of words into one well-mixed 64-bit key.
#[inline]
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    for &p in parts {
        h = splitmix64(h ^ p.wrapping_mul(GOLDEN).rotate_left(17));
    }
    h
}

#[inline]
pub fn fold128(x: u128) -> u64 {
    let lo = x as u64;
    let hi = (x >> 64) as u64;
    lo ^ splitmix64(hi)
}

/// Uniform in (0,1) on the grid (k + 1/2)·2^-40, never 0 or 1.
#[inline]
pub fn unit_open(word: u64) -> f64 {
    ((word >> 24) as f64 + 0.5) * (1.0 / (1u64 << 40) as f64)
}

/// Uniform in [0,1) with 53 bits.
#[inline]
pub fn unit53(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A keyed stream of words: `word(i)` is the i-th output for this key.
#[derive(Clone, Copy, Debug)]
pub struct Counter {
    key: u64,
}

impl Counter {
    pub fn new(seed: u64, parts: &[u64]) -> Self {
        Counter { key: derive(seed, parts) }
    }

    #[inline]
    pub fn word(&self, i: u64) -> u64 {
        splitmix64(self.key ^ splitmix64(i.wrapping_add(0x6A09_E667_F3BC_C909)))
    }

    #[inline]
    pub fn uniform(&self, i: u64) -> f64 {
        unit_open(self.word(i))
    }
}

/// Sequential generator for workload generation and sampling decisions
/// that do not need to be recomputable.
pub fn seq_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[stream]));
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_is_deterministic() {
        let a = Counter::new(7, &[1, 2, 3]);
        let b = Counter::new(7, &[1, 2, 3]);
        for i in 0..100 {
            assert_eq!(a.word(i), b.word(i));
        }
        assert_ne!(Counter::new(7, &[1, 2, 4]).word(0), a.word(0));
    }

    #[test]
    fn unit_open_bounds() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
        let u = unit_open(0x1234_5678_9ABC_DEF0);
        let scaled = u * (1u64 << 40) as f64 - 0.5;
        assert_eq!(scaled, scaled.floor());
    }

    #[test]
    fn uniform_mean_is_half() {
        let c = Counter::new(99, &[]);
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| c.uniform(i)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }
}
