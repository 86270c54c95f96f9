//! ℓ0 sampling and ℓ0 estimation from nested subsampling levels.

use super::ksparse::{Decoded, KSparse, DEFAULT_FAIL};
use crate::error::{Error, Result};
use crate::rng::{derive, fold128, splitmix64};

const LEVELS: usize = 65;

#[inline]
fn level_of(seed: u64, index: u128) -> usize {
    derive(seed, &[fold128(index)]).leading_zeros() as usize
}

fn merge_levels(a: &mut [Option<KSparse>], b: &[Option<KSparse>]) -> Result<()> {
    for (x, y) in a.iter_mut().zip(b) {
        match (x.as_mut(), y) {
            (_, None) => {}
            (Some(x), Some(y)) => x.merge(y)?,
            (None, Some(y)) => *x = Some(y.clone()),
        }
    }
    Ok(())
}

/// Returns a uniformly random support index of the input vector.
#[derive(Clone, Debug, PartialEq)]
pub struct L0Sampler {
    pub seed: u64,
    pub s: usize,
    pub fail: f64,
    pub(crate) levels: Vec<Option<KSparse>>,
}

impl L0Sampler {
    pub fn new(seed: u64) -> Self {
        Self::with_params(seed, 16, DEFAULT_FAIL)
    }

    pub fn with_params(seed: u64, s: usize, fail: f64) -> Self {
        L0Sampler { seed, s, fail, levels: vec![None; LEVELS] }
    }

    fn level_sketch(&self, j: usize) -> KSparse {
        KSparse::new(self.s, self.fail, derive(self.seed, &[0x4C30, j as u64]))
    }

    pub fn update(&mut self, index: u128, delta: i64) {
        let top = level_of(self.seed, index);
        for j in 0..=top {
            if self.levels[j].is_none() {
                self.levels[j] = Some(self.level_sketch(j));
            }
            self.levels[j].as_mut().unwrap().update(index, delta);
        }
    }

    pub fn merge(&mut self, o: &L0Sampler) -> Result<()> {
        if self.seed != o.seed || self.s != o.s {
            return Err(Error::SketchMismatch("l0 sampler seeds differ".into()));
        }
        merge_levels(&mut self.levels, &o.levels)
    }

    /// A support index, or None for FAIL (always on the zero vector).
    pub fn sample(&self) -> Option<u128> {
        let tiebreak = |i: u128| (splitmix64(fold128(i) ^ self.seed.rotate_left(29)), i);
        for lvl in self.levels.iter().flatten() {
            if let Decoded::Sparse(items) = lvl.decode() {
                if let Some(&(i, _)) = items.iter().min_by_key(|(i, _)| tiebreak(*i)) {
                    return Some(i);
                }
            }
        }
        None
    }

    pub fn cells_used(&self) -> usize {
        self.levels.iter().flatten().map(|k| k.cells_used()).sum()
    }
}

/// (1 ± ε₀) estimate of the support size, exact while the support fits in
/// one recovery sketch.
#[derive(Clone, Debug, PartialEq)]
pub struct L0Estimator {
    pub seed: u64,
    pub eps0: f64,
    pub reps: usize,
    pub cap: usize,
    pub(crate) levels: Vec<Vec<Option<KSparse>>>,
}

impl L0Estimator {
    pub fn new(eps0: f64, seed: u64) -> Self {
        Self::with_params(eps0, 5, seed)
    }

    pub fn with_params(eps0: f64, reps: usize, seed: u64) -> Self {
        let cap = ((6.0 / (eps0 * eps0)).ceil() as usize).max(8);
        L0Estimator { seed, eps0, reps, cap, levels: vec![vec![None; LEVELS]; reps] }
    }

    fn rep_seed(&self, r: usize) -> u64 {
        derive(self.seed, &[0x4C45, r as u64])
    }

    pub fn update(&mut self, index: u128, delta: i64) {
        for r in 0..self.reps {
            let rs = self.rep_seed(r);
            let top = level_of(rs, index);
            for j in 0..=top {
                let cap = self.cap;
                let slot = &mut self.levels[r][j];
                if slot.is_none() {
                    *slot = Some(KSparse::new(cap, DEFAULT_FAIL, derive(rs, &[j as u64])));
                }
                slot.as_mut().unwrap().update(index, delta);
            }
        }
    }

    pub fn merge(&mut self, o: &L0Estimator) -> Result<()> {
        if self.seed != o.seed || self.reps != o.reps || self.cap != o.cap {
            return Err(Error::SketchMismatch("l0 estimator seeds differ".into()));
        }
        for (a, b) in self.levels.iter_mut().zip(&o.levels) {
            merge_levels(a, b)?;
        }
        Ok(())
    }

    fn rep_estimate(&self, r: usize) -> f64 {
        for (j, lvl) in self.levels[r].iter().enumerate() {
            match lvl {
                None => return 0.0,
                Some(k) => {
                    if let Decoded::Sparse(items) = k.decode() {
                        return items.len() as f64 * (j as f64).exp2();
                    }
                }
            }
        }
        0.0
    }

    pub fn estimate(&self) -> f64 {
        let mut v: Vec<f64> = (0..self.reps).map(|r| self.rep_estimate(r)).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }

    pub fn cells_used(&self) -> usize {
        self.levels.iter().flatten().flatten().map(|k| k.cells_used()).sum()
    }
}

/// Round a support-size estimate the way the estimators consume it: values
/// below 1.5 become exactly 1 for a nonempty level.
pub fn rounded_size(estimate: f64) -> f64 {
    if estimate < 1.5 {
        1.0
    } else {
        estimate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_single_and_zero() {
        for seed in 0..50 {
            let mut s = L0Sampler::new(seed);
            assert_eq!(s.sample(), None);
            s.update(7, 3);
            assert_eq!(s.sample(), Some(7));
            s.update(7, -3);
            assert_eq!(s.sample(), None);
        }
    }

    #[test]
    fn sampler_support_three() {
        let mut counts = [0usize; 3];
        let idx = [2u128, 5, 9];
        let trials = 10_000;
        for seed in 0..trials {
            let mut s = L0Sampler::new(seed);
            for (k, &i) in idx.iter().enumerate() {
                s.update(i, 1 + 10 * k as i64);
            }
            let got = s.sample().unwrap();
            counts[idx.iter().position(|&i| i == got).unwrap()] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn estimator_small_and_zero() {
        let mut e = L0Estimator::new(0.2, 3);
        assert_eq!(e.estimate(), 0.0);
        e.update(11, 5);
        assert_eq!(rounded_size(e.estimate()), 1.0);
        for i in 0..40u128 {
            e.update(1000 + i, 1);
        }
        assert_eq!(e.estimate(), 41.0);
    }

    #[test]
    fn estimator_hundred() {
        let mut ok = 0;
        for seed in 0..100 {
            let mut e = L0Estimator::with_params(0.2, 5, seed);
            for i in 0..100u128 {
                e.update(i * 7919, 1);
            }
            let v = e.estimate();
            if (80.0..=120.0).contains(&v) {
                ok += 1;
            }
        }
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn estimator_large_support_is_close() {
        let mut within = 0;
        for seed in 0..20 {
            let mut e = L0Estimator::with_params(0.25, 5, seed);
            for i in 0..2000u128 {
                e.update(i, 1);
            }
            if (e.estimate() / 2000.0 - 1.0).abs() <= 0.25 {
                within += 1;
            }
        }
        assert!(within >= 18, "{within}");
    }
}
