//! k-sparse recovery by peeling.

use crate::error::{Error, Result};
use crate::hash::{add_mod, mul_mod, signed_mod, PolyHash, MERSENNE61};
use std::collections::{HashMap, VecDeque};

pub const DEFAULT_FAIL: f64 = 1.0 / (1u64 << 20) as f64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Cell {
    pub count: i64,
    pub lo: i128,
    pub hi: i128,
    pub fp: u64,
}

impl Cell {
    fn is_zero(&self) -> bool {
        self.count == 0 && self.lo == 0 && self.hi == 0 && self.fp == 0
    }

    fn add(&mut self, index: u128, delta: i64, g: u64) {
        self.count += delta;
        self.lo += delta as i128 * (index as u64) as i128;
        self.hi += delta as i128 * ((index >> 64) as u64) as i128;
        self.fp = add_mod(self.fp, mul_mod(signed_mod(delta as i128), g));
    }

    fn merge(&mut self, o: &Cell) {
        self.count += o.count;
        self.lo += o.lo;
        self.hi += o.hi;
        self.fp = add_mod(self.fp, o.fp);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decoded {
    /// Nonzero (index, value) pairs in increasing index order.
    Sparse(Vec<(u128, i64)>),
    Fail,
}

impl Decoded {
    pub fn is_fail(&self) -> bool {
        matches!(self, Decoded::Fail)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KSparse {
    pub k: usize,
    pub rows: usize,
    pub width: usize,
    pub seed: u64,
    row_hash: Vec<PolyHash>,
    fp_hash: PolyHash,
    cells: HashMap<u32, Cell>,
}

pub fn default_shape(k: usize, fail: f64) -> (usize, usize) {
    let width = (2 * k).max(8);
    let need = (1.0 / fail).log2() + 2.0 * ((k + 1) as f64).log2() + 1.0;
    let rows = ((need / (width as f64).log2()).ceil() as usize).max(3);
    (rows, width)
}

impl KSparse {
    pub fn new(k: usize, fail: f64, seed: u64) -> Self {
        let (rows, width) = default_shape(k.max(1), fail);
        Self::with_shape(k, rows, width, seed)
    }

    pub fn with_shape(k: usize, rows: usize, width: usize, seed: u64) -> Self {
        KSparse {
            k,
            rows,
            width,
            seed,
            row_hash: (0..rows).map(|r| PolyHash::new(seed, r as u64)).collect(),
            fp_hash: PolyHash::new(seed, u64::MAX),
            cells: HashMap::new(),
        }
    }

    #[inline]
    fn key(&self, row: usize, index: u128) -> u32 {
        (row * self.width + self.row_hash[row].bucket(index, self.width)) as u32
    }

    pub fn update(&mut self, index: u128, delta: i64) {
        if delta == 0 {
            return;
        }
        let g = self.fp_hash.eval128(index);
        for r in 0..self.rows {
            let key = self.key(r, index);
            let cell = self.cells.entry(key).or_default();
            cell.add(index, delta, g);
            if cell.is_zero() {
                self.cells.remove(&key);
            }
        }
    }

    fn check_compatible(&self, o: &KSparse) -> Result<()> {
        if self.seed != o.seed || self.rows != o.rows || self.width != o.width || self.k != o.k {
            return Err(Error::SketchMismatch("k-sparse seeds or shapes differ".into()));
        }
        Ok(())
    }

    pub fn merge(&mut self, o: &KSparse) -> Result<()> {
        self.check_compatible(o)?;
        for (&key, c) in &o.cells {
            let cell = self.cells.entry(key).or_default();
            cell.merge(c);
            if cell.is_zero() {
                self.cells.remove(&key);
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells_used(&self) -> usize {
        self.cells.len()
    }

    fn pure(&self, key: u32, c: &Cell) -> Option<u128> {
        if c.count == 0 || c.lo % c.count as i128 != 0 || c.hi % c.count as i128 != 0 {
            return None;
        }
        let lo = c.lo / c.count as i128;
        let hi = c.hi / c.count as i128;
        if !(0..=u64::MAX as i128).contains(&lo) || !(0..=u64::MAX as i128).contains(&hi) {
            return None;
        }
        let index = ((hi as u128) << 64) | lo as u128;
        let row = key as usize / self.width;
        if self.key(row, index) != key {
            return None;
        }
        let g = self.fp_hash.eval128(index);
        if mul_mod(signed_mod(c.count as i128), g) != c.fp % MERSENNE61 {
            return None;
        }
        Some(index)
    }

    pub fn decode(&self) -> Decoded {
        let mut cells = self.cells.clone();
        let mut queue: VecDeque<u32> = cells.keys().copied().collect();
        let mut found: HashMap<u128, i64> = HashMap::new();
        while let Some(key) = queue.pop_front() {
            let Some(c) = cells.get(&key).copied() else { continue };
            let Some(index) = self.pure(key, &c) else { continue };
            if found.insert(index, c.count).is_some() || found.len() > self.k {
                return Decoded::Fail;
            }
            let g = self.fp_hash.eval128(index);
            for r in 0..self.rows {
                let k2 = self.key(r, index);
                let cell = cells.entry(k2).or_default();
                cell.add(index, -c.count, g);
                if cell.is_zero() {
                    cells.remove(&k2);
                } else {
                    queue.push_back(k2);
                }
            }
        }
        if !cells.is_empty() {
            return Decoded::Fail;
        }
        let mut out: Vec<(u128, i64)> = found.into_iter().collect();
        out.sort_unstable();
        Decoded::Sparse(out)
    }

    pub(crate) fn raw_cells(&self) -> Vec<(u32, Cell)> {
        let mut v: Vec<(u32, Cell)> = self.cells.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    pub(crate) fn set_raw_cells(&mut self, cells: Vec<(u32, Cell)>) {
        self.cells = cells.into_iter().collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_vector_decodes_empty() {
        assert_eq!(KSparse::new(4, DEFAULT_FAIL, 1).decode(), Decoded::Sparse(vec![]));
    }

    #[test]
    fn two_nonzeros_recovered() {
        for seed in 0..200 {
            let mut s = KSparse::new(8, DEFAULT_FAIL, seed);
            s.update(17, 3);
            s.update(1u128 << 100, -2);
            s.update(17, 1);
            assert_eq!(s.decode(), Decoded::Sparse(vec![(17, 4), (1u128 << 100, -2)]));
        }
    }

    #[test]
    fn over_capacity_fails() {
        for seed in 0..200 {
            let mut s = KSparse::new(3, DEFAULT_FAIL, seed);
            for i in 0..4u128 {
                s.update(i * 1000 + 7, 1);
            }
            assert!(s.decode().is_fail());
        }
    }

    #[test]
    fn insert_delete_cancels() {
        let mut s = KSparse::new(2, DEFAULT_FAIL, 9);
        s.update(5, 7);
        s.update(5, -7);
        assert!(s.is_zero());
    }

    #[test]
    fn merge_requires_same_seed() {
        let mut a = KSparse::new(2, DEFAULT_FAIL, 1);
        let b = KSparse::new(2, DEFAULT_FAIL, 2);
        assert!(a.merge(&b).is_err());
    }
}
