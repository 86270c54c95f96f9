//! Three-level recursive ℓp precision sampler.
//!
//! The input is a vector indexed by triples (i₁, i₂, i₃). One copy of the
//! sketch holds exponentials τ₁ over i₁, τ₂^{ℓ₁} over (i₁,i₂) for ℓ₁ ∈ [S]
//! and τ₃^{ℓ₁,ℓ₂} over full triples, plus one count-sketch tower per set of
//! exponentials. A tower cell is a vector of λ accumulators
//! Σ α^r_i·x_i / (t-product)^{1/p}, with the p-stable α shared by every
//! row and tower of a copy. Bucket values are read back through the
//! median-of-|A| estimator, and the argmax of the per-index row median
//! recovers the scaled maximum level by level.
//!
//! Exponentials and α are recomputed from the seed on demand; only
//! accumulators are stored. Extra copies provide fresh exponentials for a
//! retry when the recovered maximum looks implausibly small against the
//! tower total.

use crate::error::{config, Error, Result};
use crate::hash::PolyHash;
use crate::rng::{derive, Counter};
use crate::sketch::exact::median;
use crate::sketch::pstable::{check_p, ln_median_abs, log2_p_stable};
use crate::sketch::{exp_from_uniform, Decoded, ExactSum, FixedTerm, KSparse, DEFAULT_FAIL};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_BUCKETS: usize = 256;
pub const DEFAULT_LAMBDA: usize = 65;
pub const DEFAULT_ROWS: usize = 5;
pub const DEFAULT_COPIES: usize = 2;
pub const DEFAULT_SUPPORT_K: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub i1: u32,
    pub i2: u32,
    pub i3: u64,
}

impl Triple {
    pub fn new(i1: u32, i2: u32, i3: u64) -> Self {
        Triple { i1, i2, i3 }
    }

    pub fn pack(&self) -> u128 {
        ((self.i1 as u128) << 96) | ((self.i2 as u128) << 64) | self.i3 as u128
    }

    pub fn unpack(x: u128) -> Self {
        Triple { i1: (x >> 96) as u32, i2: (x >> 64) as u32, i3: x as u64 }
    }

    fn level_key(&self, level: usize) -> u128 {
        match level {
            0 => self.i1 as u128,
            1 => ((self.i1 as u128) << 32) | self.i2 as u128,
            _ => self.pack(),
        }
    }
}

/// How indices are bounded and how candidates are enumerated at recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Universe {
    /// [n₁]×[n₂]×[n₃], enumerated exhaustively.
    Dense { n1: u32, n2: u32, n3: u64 },
    /// Arbitrary keys; candidates come from a sparse-recovery sketch of the
    /// support, so recovery needs at most `support_k` nonzeros.
    Keyed,
}

impl Universe {
    pub fn size(&self) -> f64 {
        match *self {
            Universe::Dense { n1, n2, n3 } => n1 as f64 * n2 as f64 * n3 as f64,
            Universe::Keyed => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecSamplerConfig {
    pub p: f64,
    pub gamma: f64,
    /// S: samples per level; a batch holds 1 + S + S² indices.
    pub samples: usize,
    pub rows: usize,
    pub buckets: usize,
    pub lambda: usize,
    pub copies: usize,
    pub support_k: usize,
}

pub fn default_gamma(samples: usize) -> f64 {
    0.02f64.min(1.0 / (48.0 * (samples * samples) as f64))
}

/// Repetitions that resolve a (1+γ) gap between two bucket estimates at
/// three standard deviations of their log-difference.
pub fn gap_lambda(p: f64, gamma: f64) -> usize {
    let g = crate::sketch::pstable::ln_abs_density_at_median(p);
    let sd_unit = std::f64::consts::SQRT_2 / (2.0 * g);
    ((3.0 * sd_unit / gamma.ln_1p()).powi(2)).ceil() as usize
}

impl RecSamplerConfig {
    pub fn new(p: f64, samples: usize) -> Self {
        RecSamplerConfig {
            p,
            gamma: default_gamma(samples),
            samples,
            rows: DEFAULT_ROWS,
            buckets: DEFAULT_BUCKETS,
            lambda: DEFAULT_LAMBDA,
            copies: DEFAULT_COPIES,
            support_k: DEFAULT_SUPPORT_K,
        }
    }

    /// p = 0.01/ln n, so |x_i|^p ≈ 1 for every nonzero |x_i| ≤ n and the
    /// ℓp law becomes the support-uniform law.
    pub fn l0(n: usize, samples: usize) -> Self {
        Self::new(l0_p(n), samples)
    }

    pub fn with_shape(mut self, rows: usize, buckets: usize, lambda: usize) -> Self {
        self.rows = rows;
        self.buckets = buckets;
        self.lambda = lambda;
        self
    }

    /// Size λ by `gap_lambda` for the current p and γ.
    pub fn with_gap_lambda(mut self) -> Self {
        self.lambda = gap_lambda(self.p, self.gamma);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_copies(mut self, copies: usize) -> Self {
        self.copies = copies;
        self
    }

    pub fn with_support_k(mut self, k: usize) -> Self {
        self.support_k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return config("γ must lie in (0,1)");
        }
        if self.samples == 0 || self.rows == 0 || self.buckets == 0 || self.lambda == 0 || self.copies == 0 {
            return config("sampler dimensions must be positive");
        }
        if self.buckets >= 1 << 28 || self.rows >= 256 || self.copies >= 256 || self.towers() >= 1 << 20 {
            return config("sampler dimensions too large");
        }
        Ok(())
    }

    pub fn towers(&self) -> usize {
        1 + self.samples + self.samples * self.samples
    }
}

pub fn l0_p(n: usize) -> f64 {
    0.01 / (n.max(3) as f64).ln()
}

/// One recovered batch: i₁, then i₂ under each τ₂^{ℓ₁}, then i₃ under each
/// τ₃^{ℓ₁,ℓ₂}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub i1: u32,
    pub i2: Vec<u32>,
    pub i3: Vec<Vec<u64>>,
    /// Copy of the exponentials that produced the batch.
    pub copy: usize,
}

impl SampleBatch {
    pub fn trio(&self, l1: usize, l2: usize) -> Triple {
        Triple::new(self.i1, self.i2[l1], self.i3[l1][l2])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchFail {
    ZeroVector,
    /// The support sketch could not be decoded (keyed universe only).
    Support,
    /// Every copy was rejected by the plausibility check.
    Rejected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecSampler {
    pub cfg: RecSamplerConfig,
    pub universe: Universe,
    pub seed: u64,
    q_bits: i32,
    hashes: Vec<PolyHash>,
    cells: BTreeMap<u64, Vec<ExactSum>>,
    support: Option<KSparse>,
}

fn cell_key(copy: usize, tower: usize, row: usize, bucket: usize) -> u64 {
    ((copy as u64) << 56) | ((tower as u64) << 36) | ((row as u64) << 28) | bucket as u64
}

impl RecSampler {
    pub fn new(cfg: RecSamplerConfig, universe: Universe, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if let Universe::Dense { n1, n2, n3 } = universe {
            if n1 == 0 || n2 == 0 || n3 == 0 {
                return config("level sizes must be at least 1");
            }
        }
        let mut hashes = Vec::with_capacity(cfg.copies * 3 * cfg.rows);
        for c in 0..cfg.copies {
            for level in 0..3 {
                for r in 0..cfg.rows {
                    hashes.push(PolyHash::new(seed, derive(0x5243, &[c as u64, level, r as u64])));
                }
            }
        }
        // Scale so that terms with t-product up to about 2^6 keep 40 bits.
        let q_bits = 40 + (6.0 * 3.0 / cfg.p).ceil() as i32;
        let support = match universe {
            Universe::Keyed => Some(KSparse::new(cfg.support_k, DEFAULT_FAIL, derive(seed, &[0x5355]))),
            Universe::Dense { .. } => None,
        };
        Ok(RecSampler { cfg, universe, seed, q_bits, hashes, cells: BTreeMap::new(), support })
    }

    fn hash(&self, copy: usize, level: usize, row: usize) -> &PolyHash {
        &self.hashes[(copy * 3 + level) * self.cfg.rows + row]
    }

    fn bucket(&self, copy: usize, level: usize, row: usize, ix: &Triple) -> usize {
        self.hash(copy, level, row).bucket(ix.level_key(level), self.cfg.buckets)
    }

    pub fn t1(&self, copy: usize, i1: u32) -> f64 {
        let c = Counter::new(self.seed, &[0x7431, copy as u64, i1 as u64]);
        exp_from_uniform(c.uniform(0), 1.0)
    }

    pub fn t2(&self, copy: usize, l1: usize, i1: u32, i2: u32) -> f64 {
        let c = Counter::new(self.seed, &[0x7432, copy as u64, l1 as u64, i1 as u64, i2 as u64]);
        exp_from_uniform(c.uniform(0), 1.0)
    }

    pub fn t3(&self, copy: usize, l1: usize, l2: usize, ix: &Triple) -> f64 {
        let c = Counter::new(
            self.seed,
            &[0x7433, copy as u64, l1 as u64, l2 as u64, ix.i1 as u64, ix.i2 as u64, ix.i3],
        );
        exp_from_uniform(c.uniform(0), 1.0)
    }

    fn alpha(&self, copy: usize, ix: &Triple, r: usize) -> (bool, f64) {
        let c = Counter::new(self.seed, &[0xA1FA, copy as u64, ix.i1 as u64, ix.i2 as u64, ix.i3]);
        log2_p_stable(c.uniform(2 * r as u64), c.uniform(2 * r as u64 + 1), self.cfg.p)
    }

    /// Tower index and level for tower 0, tower 1+ℓ₁ and tower 1+S+ℓ₁S+ℓ₂.
    fn tower_of(&self, level: usize, l1: usize, l2: usize) -> usize {
        let s = self.cfg.samples;
        match level {
            0 => 0,
            1 => 1 + l1,
            _ => 1 + s + l1 * s + l2,
        }
    }

    fn check_index(&self, ix: &Triple) -> Result<()> {
        if let Universe::Dense { n1, n2, n3 } = self.universe {
            if ix.i1 >= n1 || ix.i2 >= n2 || ix.i3 >= n3 {
                return Err(Error::IndexOutOfRange(format!("{ix:?} outside {n1}×{n2}×{n3}")));
            }
        }
        Ok(())
    }

    pub fn update(&mut self, ix: Triple, delta: i64) -> Result<()> {
        self.check_index(&ix)?;
        if delta == 0 {
            return Ok(());
        }
        let s = self.cfg.samples;
        let inv_p = 1.0 / self.cfg.p;
        for copy in 0..self.cfg.copies {
            let alphas: Vec<(bool, f64)> = (0..self.cfg.lambda).map(|r| self.alpha(copy, &ix, r)).collect();
            let l_t1 = self.t1(copy, ix.i1).log2();
            let mut towers: Vec<(usize, usize, f64)> = vec![(0, 0, l_t1)];
            for l1 in 0..s {
                let l_t2 = l_t1 + self.t2(copy, l1, ix.i1, ix.i2).log2();
                towers.push((self.tower_of(1, l1, 0), 1, l_t2));
                for l2 in 0..s {
                    let l_t3 = l_t2 + self.t3(copy, l1, l2, &ix).log2();
                    towers.push((self.tower_of(2, l1, l2), 2, l_t3));
                }
            }
            for (tower, level, l_t) in towers {
                let terms: Vec<FixedTerm> = alphas
                    .iter()
                    .map(|&(neg, la)| FixedTerm::from_log2(neg, la - inv_p * l_t, self.q_bits))
                    .collect();
                for row in 0..self.cfg.rows {
                    let b = self.bucket(copy, level, row, &ix);
                    let key = cell_key(copy, tower, row, b);
                    let cell = self.cells.entry(key).or_insert_with(|| vec![ExactSum::zero(); self.cfg.lambda]);
                    for (acc, &term) in cell.iter_mut().zip(&terms) {
                        acc.add_term(term, delta);
                    }
                    if cell.iter().all(|a| a.is_zero()) {
                        self.cells.remove(&key);
                    }
                }
            }
        }
        if let Some(sup) = &mut self.support {
            sup.update(ix.pack(), delta);
        }
        Ok(())
    }

    pub fn merge(&mut self, o: &RecSampler) -> Result<()> {
        if self.cfg != o.cfg || self.universe != o.universe || self.seed != o.seed {
            return Err(Error::SketchMismatch("recursive samplers differ".into()));
        }
        for (k, v) in &o.cells {
            let cell = self.cells.entry(*k).or_insert_with(|| vec![ExactSum::zero(); self.cfg.lambda]);
            for (a, b) in cell.iter_mut().zip(v) {
                a.add(b);
            }
            if cell.iter().all(|a| a.is_zero()) {
                self.cells.remove(k);
            }
        }
        if let (Some(a), Some(b)) = (&mut self.support, &o.support) {
            a.merge(b)?;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.cells.is_empty() && self.support.as_ref().map_or(true, |s| s.is_zero())
    }

    pub fn cells_used(&self) -> usize {
        self.cells.len() * self.cfg.lambda + self.support.as_ref().map_or(0, |s| s.cells_used())
    }

    /// Raw accumulators of one cell, for exactness checks.
    pub fn cell(&self, copy: usize, tower: usize, row: usize, bucket: usize) -> Option<&[ExactSum]> {
        self.cells.get(&cell_key(copy, tower, row, bucket)).map(|v| v.as_slice())
    }

    fn cell_log2_of(&self, cell: &[ExactSum]) -> f64 {
        let mut logs: Vec<f64> = cell.iter().map(|a| a.log2_abs()).collect();
        median(&mut logs) - self.q_bits as f64 - ln_median_abs(self.cfg.p) / std::f64::consts::LN_2
    }

    /// log2 of the bucket estimate B; −∞ for an empty bucket.
    pub fn bucket_log2(&self, copy: usize, tower: usize, row: usize, bucket: usize) -> f64 {
        match self.cell(copy, tower, row, bucket) {
            Some(c) => self.cell_log2_of(c),
            None => f64::NEG_INFINITY,
        }
    }

    /// Median over rows of the bucket estimates containing `ix` at `level`.
    pub fn score_log2(&self, copy: usize, level: usize, l1: usize, l2: usize, ix: &Triple) -> f64 {
        let tower = self.tower_of(level, l1, l2);
        let mut v: Vec<f64> = (0..self.cfg.rows)
            .map(|row| self.bucket_log2(copy, tower, row, self.bucket(copy, level, row, ix)))
            .collect();
        median(&mut v)
    }

    /// log2 of the tower's estimated Σ mass/t-product, the median over rows
    /// of Σ_b B^p.
    pub fn tower_total_log2p(&self, copy: usize, tower: usize) -> f64 {
        let p = self.cfg.p;
        let mut per_row = Vec::with_capacity(self.cfg.rows);
        for row in 0..self.cfg.rows {
            let lo = cell_key(copy, tower, row, 0);
            let hi = cell_key(copy, tower, row + 1, 0);
            let logs: Vec<f64> = self.cells.range(lo..hi).map(|(_, c)| p * self.cell_log2_of(c)).collect();
            per_row.push(log2_sum_exp2(&logs));
        }
        median(&mut per_row)
    }

    /// Candidate triples: the dense universe, or the decoded support.
    fn candidates(&self) -> std::result::Result<Vec<Triple>, BatchFail> {
        match (self.universe, &self.support) {
            (_, Some(sup)) => match sup.decode() {
                Decoded::Sparse(v) => Ok(v.into_iter().map(|(k, _)| Triple::unpack(k)).collect()),
                Decoded::Fail => Err(BatchFail::Support),
            },
            (Universe::Dense { n1, n2, n3 }, None) => {
                let mut v = Vec::new();
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        for i3 in 0..n3 {
                            v.push(Triple::new(i1, i2, i3));
                        }
                    }
                }
                Ok(v)
            }
            (Universe::Keyed, None) => unreachable!("keyed sampler always carries a support sketch"),
        }
    }

    /// Nonzero support within a prefix, decoded from the support sketch.
    /// `None` when the universe is dense or the sketch is not decodable.
    pub fn support_with_prefix(&self, i1: u32, i2: Option<u32>) -> Option<Vec<(Triple, i64)>> {
        let sup = self.support.as_ref()?;
        match sup.decode() {
            Decoded::Sparse(v) => Some(
                v.into_iter()
                    .map(|(k, c)| (Triple::unpack(k), c))
                    .filter(|(t, _)| t.i1 == i1 && i2.map_or(true, |j| t.i2 == j))
                    .collect(),
            ),
            Decoded::Fail => None,
        }
    }

    fn argmax(
        &self,
        copy: usize,
        level: usize,
        l1: usize,
        l2: usize,
        cands: &[Triple],
    ) -> Option<(Triple, f64)> {
        let mut seen = BTreeSet::new();
        let mut best: Option<(Triple, f64)> = None;
        for c in cands {
            let key = c.level_key(level);
            if !seen.insert(key) {
                continue;
            }
            let s = self.score_log2(copy, level, l1, l2, c);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((*c, s));
            }
        }
        best.filter(|&(_, s)| s.is_finite())
    }

    fn plausible(&self, copy: usize, tower: usize, score_log2: f64) -> bool {
        let p = self.cfg.p;
        p * score_log2 >= 3.0 * self.cfg.gamma.log2() + self.tower_total_log2p(copy, tower)
    }

    fn batch_from_copy(&self, copy: usize, cands: &[Triple]) -> Option<SampleBatch> {
        let s = self.cfg.samples;
        let (top, sc) = self.argmax(copy, 0, 0, 0, cands)?;
        if !self.plausible(copy, 0, sc) {
            return None;
        }
        let i1 = top.i1;
        let level2: Vec<Triple> = cands.iter().copied().filter(|t| t.i1 == i1).collect();
        let mut i2 = Vec::with_capacity(s);
        let mut i3 = Vec::with_capacity(s);
        for l1 in 0..s {
            let (t2, sc) = self.argmax(copy, 1, l1, 0, &level2)?;
            if !self.plausible(copy, self.tower_of(1, l1, 0), sc) {
                return None;
            }
            let level3: Vec<Triple> = level2.iter().copied().filter(|t| t.i2 == t2.i2).collect();
            let mut row = Vec::with_capacity(s);
            for l2 in 0..s {
                let (t3, sc) = self.argmax(copy, 2, l1, l2, &level3)?;
                if !self.plausible(copy, self.tower_of(2, l1, l2), sc) {
                    return None;
                }
                row.push(t3.i3);
            }
            i2.push(t2.i2);
            i3.push(row);
        }
        Some(SampleBatch { i1, i2, i3, copy })
    }

    /// Recover a batch, moving to the next copy of the exponentials when
    /// the plausibility check rejects the current one.
    pub fn sample_batch(&self) -> std::result::Result<SampleBatch, BatchFail> {
        if self.is_zero() {
            return Err(BatchFail::ZeroVector);
        }
        let cands = self.candidates()?;
        if cands.is_empty() {
            return Err(BatchFail::ZeroVector);
        }
        for copy in 0..self.cfg.copies {
            if let Some(b) = self.batch_from_copy(copy, &cands) {
                return Ok(b);
            }
        }
        Err(BatchFail::Rejected)
    }

    /// The first-level recovery alone for one copy: argmax_i of the row
    /// median of bucket estimates.
    pub fn recover_i1(&self, copy: usize) -> Option<u32> {
        let cands = self.candidates().ok()?;
        self.argmax(copy, 0, 0, 0, &cands).map(|(t, _)| t.i1)
    }

    pub fn recover_i2(&self, copy: usize, l1: usize, i1: u32) -> Option<u32> {
        let cands: Vec<Triple> = self.candidates().ok()?.into_iter().filter(|t| t.i1 == i1).collect();
        self.argmax(copy, 1, l1, 0, &cands).map(|(t, _)| t.i2)
    }

    pub fn recover_i3(&self, copy: usize, l1: usize, l2: usize, i1: u32, i2: u32) -> Option<u64> {
        let cands: Vec<Triple> =
            self.candidates().ok()?.into_iter().filter(|t| t.i1 == i1 && t.i2 == i2).collect();
        self.argmax(copy, 2, l1, l2, &cands).map(|(t, _)| t.i3)
    }
}

fn log2_sum_exp2(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp2()).sum::<f64>().log2()
}

/// Oracle-side evaluation of the conditioning events for one trio of
/// exponentials, from the known input vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EventCheck {
    /// Gap events at levels 1..3: max ≥ γ·mass and max ≥ (1+γ)·runner-up.
    pub gap: [bool; 3],
    /// Sum events at levels 1..3.
    pub sum: [bool; 3],
    /// The exact scaled argmax (i₁*, i₂*, i₃*).
    pub exact: Triple,
}

impl EventCheck {
    pub fn all(&self) -> bool {
        self.gap.iter().chain(&self.sum).all(|&b| b)
    }
}

fn top_two<K: Copy>(it: impl Iterator<Item = (K, f64)>) -> Option<(K, f64, f64)> {
    let mut best: Option<(K, f64)> = None;
    let mut second = 0.0f64;
    for (k, v) in it {
        match best {
            Some((_, b)) if v <= b => second = second.max(v),
            Some((_, b)) => {
                second = second.max(b);
                best = Some((k, v));
            }
            None => best = Some((k, v)),
        }
    }
    best.map(|(k, v)| (k, v, second))
}

/// Check the six events for copy `copy` and the trio (τ₁, τ₂^{ℓ₁},
/// τ₃^{ℓ₁,ℓ₂}) against the vector `x`. `n` is the dimension used in the
/// log(n/γ) factor. Returns `None` for the zero vector.
pub fn check_events(
    s: &RecSampler,
    x: &BTreeMap<Triple, i64>,
    copy: usize,
    l1: usize,
    l2: usize,
    n: f64,
) -> Option<EventCheck> {
    let p = s.cfg.p;
    let g = s.cfg.gamma;
    let pow = |v: i64| (v.unsigned_abs() as f64).powf(p);
    let mut m1: BTreeMap<u32, f64> = BTreeMap::new();
    let mut m2: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut total = 0.0;
    for (ix, &v) in x {
        if v == 0 {
            continue;
        }
        *m1.entry(ix.i1).or_default() += pow(v);
        *m2.entry((ix.i1, ix.i2)).or_default() += pow(v);
        total += pow(v);
    }
    if total == 0.0 {
        return None;
    }
    let c = 4.0 * (n / g).ln() / g;
    // Level 1.
    let (i1, z1, r1) = top_two(m1.iter().map(|(&i, &m)| (i, m / s.t1(copy, i))))?;
    let sum1: f64 = m1.iter().map(|(&i, &m)| m / s.t1(copy, i)).sum();
    // Level 2, restricted to i₁*; the sum event ranges over every prefix.
    let (i2, z2, r2) = top_two(
        m2.iter().filter(|((a, _), _)| *a == i1).map(|(&(a, b), &m)| (b, m / s.t2(copy, l1, a, b))),
    )?;
    let sum2: f64 = m2.iter().map(|(&(a, b), &m)| m / (s.t1(copy, a) * s.t2(copy, l1, a, b))).sum();
    // Level 3, restricted to (i₁*, i₂*).
    let (i3, z3, r3) = top_two(
        x.iter()
            .filter(|(ix, &v)| ix.i1 == i1 && ix.i2 == i2 && v != 0)
            .map(|(ix, &v)| (ix.i3, pow(v) / s.t3(copy, l1, l2, ix))),
    )?;
    let sum3: f64 = x
        .iter()
        .filter(|(_, &v)| v != 0)
        .map(|(ix, &v)| pow(v) / (s.t1(copy, ix.i1) * s.t2(copy, l1, ix.i1, ix.i2) * s.t3(copy, l1, l2, ix)))
        .sum();
    let gap = |z: f64, r: f64, mass: f64| z >= g * mass && z >= (1.0 + g) * r;
    Some(EventCheck {
        gap: [gap(z1, r1, total), gap(z2, r2, m1[&i1]), gap(z3, r3, m2[&(i1, i2)])],
        sum: [sum1 <= c * total, sum2 <= c * c * total, sum3 <= c * c * c * total],
        exact: Triple::new(i1, i2, i3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p: f64) -> RecSamplerConfig {
        RecSamplerConfig::new(p, 1).with_shape(3, 32, 9).with_copies(1)
    }

    #[test]
    fn pack_round_trip() {
        let t = Triple::new(7, u32::MAX, 1 << 40);
        assert_eq!(Triple::unpack(t.pack()), t);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut s = RecSampler::new(small(1.0), Universe::Dense { n1: 2, n2: 2, n3: 2 }, 1).unwrap();
        assert!(matches!(s.update(Triple::new(2, 0, 0), 1), Err(Error::IndexOutOfRange(_))));
        assert!(RecSampler::new(small(1.0), Universe::Dense { n1: 0, n2: 2, n3: 2 }, 1).is_err());
        assert!(RecSampler::new(small(2.5), Universe::Keyed, 1).is_err());
    }

    #[test]
    fn insert_then_delete_is_zero() {
        let mut s = RecSampler::new(small(0.5), Universe::Keyed, 3).unwrap();
        s.update(Triple::new(1, 2, 3), 4).unwrap();
        s.update(Triple::new(0, 2, 9), 1).unwrap();
        assert!(!s.is_zero());
        s.update(Triple::new(1, 2, 3), -4).unwrap();
        s.update(Triple::new(0, 2, 9), -1).unwrap();
        assert!(s.is_zero());
        assert_eq!(s.sample_batch(), Err(BatchFail::ZeroVector));
    }

    #[test]
    fn singleton_universe() {
        let mut s = RecSampler::new(small(1.0), Universe::Dense { n1: 1, n2: 1, n3: 1 }, 5).unwrap();
        s.update(Triple::new(0, 0, 0), 3).unwrap();
        let b = s.sample_batch().unwrap();
        assert_eq!(b, SampleBatch { i1: 0, i2: vec![0], i3: vec![vec![0]], copy: 0 });
    }

    #[test]
    fn single_nonzero_block_always_wins() {
        for seed in 0..20 {
            let mut s = RecSampler::new(small(1.0), Universe::Dense { n1: 4, n2: 3, n3: 2 }, seed).unwrap();
            s.update(Triple::new(2, 1, 1), 5).unwrap();
            s.update(Triple::new(2, 1, 0), 2).unwrap();
            assert_eq!(s.recover_i1(0), Some(2));
            assert_eq!(s.recover_i2(0, 0, 2), Some(1));
        }
    }

    #[test]
    fn l0_exponent() {
        let p = l0_p(100);
        assert!((p - 0.01 / 100f64.ln()).abs() < 1e-15);
        assert!((100f64.powf(p) - 1.0).abs() < 0.011);
    }

    #[test]
    fn events_on_a_dominant_coordinate() {
        let s = RecSampler::new(small(1.0), Universe::Dense { n1: 2, n2: 1, n3: 1 }, 11).unwrap();
        let mut x = BTreeMap::new();
        x.insert(Triple::new(0, 0, 0), 1i64);
        let e = check_events(&s, &x, 0, 0, 0, 2.0).unwrap();
        assert_eq!(e.exact, Triple::new(0, 0, 0));
        assert!(e.gap.iter().all(|&g| g) || s.t1(0, 0) > 1.0 / s.cfg.gamma);
    }

    #[test]
    fn gap_lambda_for_cauchy() {
        // sd of ln|X| median for Cauchy is π/(2√λ)
        let l = gap_lambda(1.0, 0.02);
        let sd = std::f64::consts::PI / (2.0 * (l as f64).sqrt());
        assert!((3.0 * std::f64::consts::SQRT_2 * sd - 0.02f64.ln_1p()).abs() < 1e-5, "{l}");
    }
}
