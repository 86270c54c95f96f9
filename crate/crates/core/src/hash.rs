//! 4-wise independent hashing over the Mersenne field 2^61 - 1.

use crate::rng::{derive, fold128};
use serde::{Deserialize, Serialize};

pub const MERSENNE61: u64 = (1 << 61) - 1;

#[inline]
pub fn mod_mersenne(x: u128) -> u64 {
    let lo = (x as u64) & MERSENNE61;
    let hi = x >> 61;
    let mut r = lo + (hi as u64 & MERSENNE61) + (hi >> 61) as u64;
    while r >= MERSENNE61 {
        r -= MERSENNE61;
    }
    r
}

#[inline]
pub fn mul_mod(a: u64, b: u64) -> u64 {
    mod_mersenne(a as u128 * b as u128)
}

#[inline]
pub fn add_mod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MERSENNE61 {
        s - MERSENNE61
    } else {
        s
    }
}

/// Reduce a signed integer into the field.
#[inline]
pub fn signed_mod(x: i128) -> u64 {
    let m = MERSENNE61 as i128;
    let r = x % m;
    (if r < 0 { r + m } else { r }) as u64
}

/// Degree-3 polynomial with random coefficients: 4-wise independent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyHash {
    coef: [u64; 4],
}

impl PolyHash {
    pub fn new(seed: u64, role: u64) -> Self {
        let mut coef = [0u64; 4];
        for (i, c) in coef.iter_mut().enumerate() {
            *c = derive(seed, &[role, i as u64]) % MERSENNE61;
        }
        if coef[3] == 0 {
            coef[3] = 1;
        }
        PolyHash { coef }
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        let x = x % MERSENNE61;
        let mut acc = self.coef[3];
        acc = add_mod(mul_mod(acc, x), self.coef[2]);
        acc = add_mod(mul_mod(acc, x), self.coef[1]);
        add_mod(mul_mod(acc, x), self.coef[0])
    }

    #[inline]
    pub fn eval128(&self, x: u128) -> u64 {
        self.eval(fold128(x))
    }

    #[inline]
    pub fn bucket(&self, x: u128, width: usize) -> usize {
        (self.eval128(x) % width as u64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mersenne_reduction_matches_naive() {
        let samples = [
            0u128,
            1,
            MERSENNE61 as u128,
            MERSENNE61 as u128 + 5,
            u64::MAX as u128 * u64::MAX as u128,
            (1u128 << 122) + 12345,
        ];
        for &s in &samples {
            assert_eq!(mod_mersenne(s) as u128, s % MERSENNE61 as u128);
        }
    }

    #[test]
    fn signed_mod_negative() {
        assert_eq!(signed_mod(-1), MERSENNE61 - 1);
        assert_eq!(add_mod(signed_mod(-5), 5), 0);
    }

    #[test]
    fn buckets_are_roughly_balanced() {
        let h = PolyHash::new(3, 0);
        let w = 16;
        let mut counts = vec![0usize; w];
        for i in 0..16_000u128 {
            counts[h.bucket(i, w)] += 1;
        }
        for c in counts {
            assert!((800..1200).contains(&c), "{c}");
        }
    }
}
