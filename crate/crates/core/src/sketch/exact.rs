//! Exact fixed-point accumulators.
//!
//! Coefficients are rounded once to a multiple of 2^-q and then summed
//! without error, so a sketch is an exactly linear function of its input:
//! inserting and deleting the same update restores the zero state, and the
//! order of updates or merges never matters.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

/// Default number of fractional bits.
pub const Q_BITS: i32 = 40;

/// A coefficient already rounded to the fixed-point grid: value·2^q equals
/// `mant · 2^shift`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedTerm {
    pub mant: i64,
    pub shift: u32,
}

impl FixedTerm {
    pub const ZERO: FixedTerm = FixedTerm { mant: 0, shift: 0 };

    fn from_parts(neg: bool, mant: u64, exp: i64, q: i32) -> Self {
        // value = mant · 2^exp, scaled by 2^q.
        let s = exp + q as i64;
        let m = if s >= 0 {
            mant
        } else if s < -64 {
            0
        } else {
            let sh = (-s) as u32;
            ((mant as u128 + (1u128 << (sh - 1))) >> sh) as u64
        };
        if m == 0 {
            return FixedTerm::ZERO;
        }
        let m = m as i64;
        FixedTerm { mant: if neg { -m } else { m }, shift: s.max(0) as u32 }
    }

    pub fn from_f64(c: f64, q: i32) -> Self {
        if c == 0.0 || !c.is_finite() {
            return FixedTerm::ZERO;
        }
        let bits = c.abs().to_bits();
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if exp_bits == 0 { (frac, -1074) } else { (frac | (1 << 52), exp_bits - 1075) };
        Self::from_parts(c < 0.0, mant, exp, q)
    }

    /// From sign and log2 of the magnitude; handles magnitudes far outside
    /// the f64 range.
    pub fn from_log2(neg: bool, log2abs: f64, q: i32) -> Self {
        if !log2abs.is_finite() {
            return FixedTerm::ZERO;
        }
        let e = log2abs.floor();
        let frac = log2abs - e;
        let mant = (frac.exp2() * (1u64 << 52) as f64).round() as u64;
        Self::from_parts(neg, mant, e as i64 - 52, q)
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExactSum {
    Small(i128),
    Big(BigInt),
}

impl Default for ExactSum {
    fn default() -> Self {
        ExactSum::Small(0)
    }
}

impl ExactSum {
    pub fn zero() -> Self {
        ExactSum::Small(0)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ExactSum::Small(v) => *v == 0,
            ExactSum::Big(b) => b.is_zero(),
        }
    }

    fn add_big(&mut self, b: BigInt) {
        let cur = match std::mem::take(self) {
            ExactSum::Small(v) => BigInt::from(v),
            ExactSum::Big(x) => x,
        };
        *self = Self::normalized(cur + b);
    }

    fn normalized(b: BigInt) -> Self {
        match b.to_i128() {
            Some(v) => ExactSum::Small(v),
            None => ExactSum::Big(b),
        }
    }

    /// Add term·x exactly.
    pub fn add_term(&mut self, term: FixedTerm, x: i64) {
        if term.mant == 0 || x == 0 {
            return;
        }
        let prod = term.mant as i128 * x as i128;
        let bits = 128 - prod.unsigned_abs().leading_zeros();
        if let ExactSum::Small(v) = self {
            if bits + term.shift <= 125 {
                if let Some(s) = v.checked_add(prod << term.shift) {
                    *v = s;
                    return;
                }
            }
        }
        self.add_big(BigInt::from(prod) << term.shift as usize);
    }

    pub fn add(&mut self, other: &ExactSum) {
        match (&mut *self, other) {
            (ExactSum::Small(a), ExactSum::Small(b)) => {
                if let Some(s) = a.checked_add(*b) {
                    *a = s;
                } else {
                    self.add_big(BigInt::from(*b));
                }
            }
            (_, ExactSum::Small(b)) => self.add_big(BigInt::from(*b)),
            (_, ExactSum::Big(b)) => self.add_big(b.clone()),
        }
    }

    pub fn sub(&mut self, other: &ExactSum) {
        let neg = match other {
            ExactSum::Small(v) => match v.checked_neg() {
                Some(n) => ExactSum::Small(n),
                None => ExactSum::Big(-BigInt::from(*v)),
            },
            ExactSum::Big(b) => ExactSum::Big(-b.clone()),
        };
        self.add(&neg);
    }

    /// log2 of the absolute value of the fixed-point integer; -inf at zero.
    pub fn log2_abs(&self) -> f64 {
        match self {
            ExactSum::Small(0) => f64::NEG_INFINITY,
            ExactSum::Small(v) => (v.unsigned_abs() as f64).log2(),
            ExactSum::Big(b) => {
                let bits = b.bits();
                if bits <= 64 {
                    return (b.abs().to_u64().unwrap() as f64).log2();
                }
                let top = (b.abs() >> (bits - 64) as usize).to_u64().unwrap();
                (top as f64).log2() + (bits - 64) as f64
            }
        }
    }

    pub fn signum(&self) -> Ordering {
        match self {
            ExactSum::Small(v) => v.cmp(&0),
            ExactSum::Big(b) => {
                if b.is_positive() {
                    Ordering::Greater
                } else if b.is_negative() {
                    Ordering::Less
                } else {
                    Ordering::Equal
                }
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let b = match self {
            ExactSum::Small(v) => BigInt::from(*v),
            ExactSum::Big(b) => b.clone(),
        };
        b.to_signed_bytes_le()
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self::normalized(BigInt::from_signed_bytes_le(bytes))
    }
}

/// Median of a slice of finite-or-infinite floats (upper median).
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_round_to_grid() {
        let t = FixedTerm::from_f64(1.5, 4);
        assert_eq!((t.mant as i128) << t.shift, 24);
        let t = FixedTerm::from_f64(-0.25, 4);
        assert_eq!((t.mant as i128) << t.shift, -4);
        assert!(FixedTerm::from_f64(1e-30, 40).is_zero());
    }

    #[test]
    fn log2_terms_match_f64_terms() {
        for &c in &[3.7f64, 1e-5, 123456.789, 2.0f64.powi(80)] {
            let a = FixedTerm::from_f64(c, 40);
            let b = FixedTerm::from_log2(false, c.log2(), 40);
            let va = (a.mant as f64) * (a.shift as f64).exp2();
            let vb = (b.mant as f64) * (b.shift as f64).exp2();
            assert!((va / vb - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn big_path_cancels_exactly() {
        let huge = FixedTerm::from_log2(false, 500.0, 40);
        let small = FixedTerm::from_f64(0.75, 40);
        let mut s = ExactSum::zero();
        s.add_term(huge, 3);
        s.add_term(small, 1);
        s.add_term(huge, -3);
        assert_eq!(s, ExactSum::Small(3 << 38));
        s.add_term(small, -1);
        assert!(s.is_zero());
    }

    #[test]
    fn log2_of_big_values() {
        let mut s = ExactSum::zero();
        s.add_term(FixedTerm::from_log2(true, 300.25, 0), 1);
        assert!((s.log2_abs() - 300.25).abs() < 1e-9);
        assert_eq!(s.signum(), Ordering::Less);
        assert_eq!(ExactSum::from_bytes(&s.to_bytes()), s);
    }

    #[test]
    fn overflow_promotes() {
        let mut s = ExactSum::Small(i128::MAX - 1);
        s.add(&ExactSum::Small(10));
        assert!(matches!(s, ExactSum::Big(_)));
        s.add(&ExactSum::Small(-10));
        assert_eq!(s, ExactSum::Small(i128::MAX - 1));
    }
}
