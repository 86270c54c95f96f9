//! Randomly shifted nested grids, the level and block structure, and the
//! discretized vertex multisets.

use crate::error::{config, Error, Result};
use crate::geometry::{Point, PointMultiset};
use crate::rng::seq_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadtreeConfig {
    pub dim: usize,
    pub lambda: i64,
    /// Upper bound on the diameter; a power of two.
    pub big_delta: u64,
    pub epsilon: f64,
    pub alpha: u32,
    pub beta: f64,
    pub delta: f64,
    pub shift: Vec<i64>,
    pub seed: u64,
}

pub fn default_delta(epsilon: f64, alpha: u32) -> f64 {
    (1.0f64 / 100.0).min(1.0 / (epsilon * alpha as f64))
}

/// Smallest β that keeps βδ ≥ 10 while staying at least 10·d.
pub fn default_beta(dim: usize, delta: f64) -> f64 {
    (10.0 * dim as f64).max(10.0 / delta)
}

pub fn random_shift(dim: usize, big_delta: u64, seed: u64) -> Vec<i64> {
    let half = (big_delta / 2).max(1) as i64;
    let mut rng = seq_rng(seed, 0x5348_4946_54);
    (0..dim).map(|_| rng.gen_range(0..half)).collect()
}

impl QuadtreeConfig {
    pub fn new(dim: usize, lambda: i64, big_delta: u64, epsilon: f64, alpha: u32, seed: u64) -> Result<Self> {
        let delta = default_delta(epsilon, alpha.max(1));
        let cfg = QuadtreeConfig {
            dim,
            lambda,
            big_delta,
            epsilon,
            alpha,
            beta: default_beta(dim, delta),
            delta,
            shift: random_shift(dim, big_delta, seed),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_shift(mut self, shift: Vec<i64>) -> Result<Self> {
        self.shift = shift;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return config("dimension must be positive");
        }
        if self.lambda < 1 {
            return config("Λ must be positive");
        }
        if !self.big_delta.is_power_of_two() {
            return config(format!("Δ = {} is not a power of two", self.big_delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return config("ε must lie in (0,1)");
        }
        if self.alpha == 0 {
            return config("α must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta <= 0.01 + 1e-15) {
            return config(format!("δ = {} exceeds 1/100", self.delta));
        }
        if self.beta * self.delta < 10.0 - 1e-9 {
            return config(format!("βδ = {} is below 10", self.beta * self.delta));
        }
        if self.shift.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: self.shift.len() });
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let log_delta = (self.big_delta as f64).log2();
        let mut w = Vec::new();
        if (self.big_delta as f64).powf(self.epsilon) < log_delta * log_delta {
            w.push(format!(
                "Δ^ε = {:.3} is below log²Δ = {:.3}; ε is small for this Δ",
                (self.big_delta as f64).powf(self.epsilon),
                log_delta * log_delta
            ));
        }
        w
    }

    pub fn levels(&self) -> LevelStructure {
        LevelStructure::geometric(self.big_delta, self.delta, self.epsilon)
    }

    pub fn quadtree(&self) -> Quadtree {
        let levels = self.levels();
        Quadtree::new(self.dim, self.beta, self.shift.clone(), levels.anchors.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStructure {
    pub levels: Vec<f64>,
    pub big_l: usize,
    pub anchors: Vec<f64>,
    /// Block index for each level.
    pub block_of: Vec<usize>,
}

pub fn block_count(epsilon: f64) -> usize {
    ((1.0 / epsilon) - 1e-9).ceil().max(1.0) as usize
}

pub fn block_anchors(big_delta: u64, epsilon: f64) -> Vec<f64> {
    let log_delta = (big_delta as f64).log2();
    (0..block_count(epsilon)).map(|i| (log_delta * i as f64 * epsilon).exp2()).collect()
}

impl LevelStructure {
    /// Levels (1+δ)^0, ..., (1+δ)^L with L minimal such that (1+δ)^{L-1} ≥ Δ.
    pub fn geometric(big_delta: u64, delta: f64, epsilon: f64) -> Self {
        let base = 1.0 + delta;
        let target = big_delta as f64;
        let mut big_l = 1usize;
        while base.powi(big_l as i32 - 1) < target {
            big_l += 1;
        }
        let levels = (0..=big_l).map(|i| base.powi(i as i32)).collect();
        Self::with_levels(levels, big_l, block_anchors(big_delta, epsilon))
    }

    /// Powers of two 1, 2, ..., Δ.
    pub fn dyadic(big_delta: u64, epsilon: f64) -> Self {
        let k = big_delta.max(1).trailing_zeros() as usize;
        let levels = (0..=k).map(|i| (1u64 << i) as f64).collect();
        Self::with_levels(levels, k, block_anchors(big_delta, epsilon))
    }

    fn with_levels(levels: Vec<f64>, big_l: usize, anchors: Vec<f64>) -> Self {
        let block_of = levels
            .iter()
            .map(|&t| anchors.iter().rposition(|&a| a <= t * (1.0 + 1e-12)).unwrap_or(0))
            .collect();
        LevelStructure { levels, big_l, anchors, block_of }
    }

    pub fn log_l(&self) -> u32 {
        (self.big_l.max(1) as f64).log2().ceil() as u32
    }

    pub fn anchor_of(&self, level_idx: usize) -> f64 {
        self.anchors[self.block_of[level_idx]]
    }
}

/// A vertex multiset at one anchor; vertex coordinates are numerators over
/// `denom`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedLevel {
    pub anchor: f64,
    pub side_exp: i32,
    pub denom: i64,
    pub vertices: BTreeMap<Point, u64>,
}

impl DiscretizedLevel {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_list(&self) -> Vec<Point> {
        self.vertices.keys().cloned().collect()
    }

    pub fn merge(&mut self, other: &DiscretizedLevel) {
        for (v, &c) in &other.vertices {
            *self.vertices.entry(v.clone()).or_insert(0) += c;
        }
    }
}

/// The shifted nested grid at each block anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadtree {
    pub dim: usize,
    pub beta: f64,
    pub shift: Vec<i64>,
    pub anchors: Vec<f64>,
    pub side_exps: Vec<i32>,
}

/// Exponent e with 2^e ≤ x < 2^{e+1}.
pub fn floor_log2(x: f64) -> i32 {
    let mut e = x.log2().floor() as i32;
    while (e as f64).exp2() > x {
        e -= 1;
    }
    while ((e + 1) as f64).exp2() <= x {
        e += 1;
    }
    e
}

#[inline]
pub fn cell_index(coord: i64, shift: i64, side_exp: i32) -> i64 {
    let v = coord + shift;
    if side_exp >= 0 {
        v >> side_exp
    } else {
        v << (-side_exp)
    }
}

/// Center numerator over 2^{max(0, 1-e)} for cell `index` of side 2^e.
#[inline]
pub fn center_numerator(index: i64, shift: i64, side_exp: i32) -> i64 {
    if side_exp >= 1 {
        (index << side_exp) + (1 << (side_exp - 1)) - shift
    } else {
        let d = 1i64 << (1 - side_exp);
        2 * index + 1 - shift * d
    }
}

impl Quadtree {
    pub fn new(dim: usize, beta: f64, shift: Vec<i64>, anchors: Vec<f64>) -> Self {
        let side_exps = anchors.iter().map(|&t| floor_log2(t / (dim as f64 * beta))).collect();
        Quadtree { dim, beta, shift, anchors, side_exps }
    }

    pub fn denom(&self, anchor_idx: usize) -> i64 {
        1i64 << (1 - self.side_exps[anchor_idx]).max(0)
    }

    pub fn side(&self, anchor_idx: usize) -> f64 {
        (self.side_exps[anchor_idx] as f64).exp2()
    }

    /// Cell center of `p` at the given anchor, as numerators over `denom`.
    pub fn snap(&self, anchor_idx: usize, p: &Point) -> Point {
        let e = self.side_exps[anchor_idx];
        Point::new(
            p.coords
                .iter()
                .zip(&self.shift)
                .map(|(&c, &s)| center_numerator(cell_index(c, s, e), s, e))
                .collect(),
        )
    }

    pub fn snap_real(&self, anchor_idx: usize, p: &Point) -> Vec<f64> {
        let d = self.denom(anchor_idx) as f64;
        self.snap(anchor_idx, p).coords.iter().map(|&c| c as f64 / d).collect()
    }

    /// Compact identifier of the vertex containing `p`; injective on the
    /// vertices of one anchor.
    pub fn vertex_key(&self, anchor_idx: usize, p: &Point) -> Vec<i64> {
        let e = self.side_exps[anchor_idx].max(0);
        p.coords.iter().zip(&self.shift).map(|(&c, &s)| (c + s) >> e).collect()
    }

    pub fn key_to_vertex(&self, anchor_idx: usize, key: &[i64]) -> Point {
        let e = self.side_exps[anchor_idx];
        Point::new(
            key.iter()
                .zip(&self.shift)
                .map(|(&k, &s)| {
                    if e >= 1 {
                        center_numerator(k, s, e)
                    } else {
                        (k - s) * (1i64 << (1 - e)) + 1
                    }
                })
                .collect(),
        )
    }

    pub fn vertex_set(&self, anchor_idx: usize, p: &PointMultiset) -> DiscretizedLevel {
        let mut vertices = BTreeMap::new();
        for (pt, &c) in &p.counts {
            *vertices.entry(self.snap(anchor_idx, pt)).or_insert(0) += c;
        }
        DiscretizedLevel {
            anchor: self.anchors[anchor_idx],
            side_exp: self.side_exps[anchor_idx],
            denom: self.denom(anchor_idx),
            vertices,
        }
    }

    pub fn all_vertex_sets(&self, p: &PointMultiset) -> Vec<DiscretizedLevel> {
        (0..self.anchors.len()).map(|i| self.vertex_set(i, p)).collect()
    }

    /// Σ_T (T/β)(|V_T| - 1) over the block anchors.
    pub fn cost(&self, p: &PointMultiset) -> f64 {
        if p.is_empty() {
            return 0.0;
        }
        (0..self.anchors.len())
            .map(|i| self.anchors[i] / self.beta * (self.vertex_set(i, p).len() as f64 - 1.0))
            .sum()
    }
}

/// Pack a nonnegative vertex key into one word, 64/d bits per coordinate.
pub fn pack_key(key: &[i64]) -> Result<u64> {
    let d = key.len().max(1);
    let bits = (64 / d) as u32;
    let mut id = 0u64;
    for &k in key {
        if k < 0 || (bits < 64 && (k as u64) >> bits != 0) {
            return Err(Error::IndexOutOfRange(format!("vertex key {key:?} does not fit {bits} bits per coordinate")));
        }
        id = if bits == 64 { k as u64 } else { (id << bits) | k as u64 };
    }
    Ok(id)
}

pub fn unpack_key(id: u64, dim: usize) -> Vec<i64> {
    let bits = (64 / dim.max(1)) as u32;
    if bits == 64 {
        return vec![id as i64];
    }
    let mask = (1u64 << bits) - 1;
    (0..dim).rev().map(|i| ((id >> (bits * i as u32)) & mask) as i64).collect()
}

pub fn quadtree_cost(qt: &Quadtree, p: &PointMultiset) -> f64 {
    qt.cost(p)
}

/// Largest constant C with cost ≤ C·(d/ε)·MST that the Markov argument
/// supports at failure probability 1/5 for this ε.
pub fn cost_constant(epsilon: f64) -> f64 {
    // E[cost] ≤ 2·d·blocks·MST, the factor 2 coming from the power-of-two
    // side rounding; Markov at probability 1/5 gives a factor 5.
    5.0 * 2.0 * block_count(epsilon) as f64 * epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::l1;

    fn pt(c: &[i64]) -> Point {
        Point::new(c.to_vec())
    }

    #[test]
    fn packed_keys_round_trip() {
        for key in [vec![0i64], vec![5, 7], vec![1, 2, 3], vec![(1 << 21) - 1, 0, 9]] {
            assert_eq!(unpack_key(pack_key(&key).unwrap(), key.len()), key);
        }
        assert!(pack_key(&[1 << 32, 0]).is_err());
        assert!(pack_key(&[-1]).is_err());
    }

    #[test]
    fn dyadic_levels() {
        let ls = LevelStructure::dyadic(16, 0.5);
        assert_eq!(ls.levels, vec![1.0, 2.0, 4.0, 8.0, 16.0]);
    }

    #[test]
    fn anchors_for_sixteen_half() {
        let ls = LevelStructure::geometric(16, 0.01, 0.5);
        assert_eq!(ls.anchors, vec![1.0, 4.0]);
        for (i, &t) in ls.levels.iter().enumerate() {
            let expect = if t >= 4.0 { 1 } else { 0 };
            assert_eq!(ls.block_of[i], expect, "level {t}");
        }
    }

    #[test]
    fn level_count_for_two() {
        let ls = LevelStructure::geometric(2, 0.01, 0.5);
        let mut l = 1;
        while 1.01f64.powi(l - 1) < 2.0 {
            l += 1;
        }
        assert_eq!(ls.big_l, l as usize);
        assert_eq!(ls.big_l, 71);
        assert!(1.01f64.powi(70) >= 2.0 && 1.01f64.powi(69) < 2.0);
    }

    #[test]
    fn center_convention() {
        assert_eq!(cell_index(1, 0, 2), 0);
        assert_eq!(center_numerator(0, 0, 2), 2);
        assert_eq!(cell_index(5, 3, 2), 2);
        assert_eq!(center_numerator(2, 3, 2), 10 - 3);
    }

    #[test]
    fn config_validation() {
        assert!(QuadtreeConfig::new(2, 64, 64, 0.5, 2, 1).is_ok());
        assert!(QuadtreeConfig::new(2, 64, 60, 0.5, 2, 1).is_err());
        let cfg = QuadtreeConfig::new(2, 64, 64, 0.5, 2, 1).unwrap();
        assert!(cfg.clone().with_beta(20.0).is_err());
        assert!(cfg.beta * cfg.delta >= 10.0);
        assert!(cfg.shift.iter().all(|&s| (0..32).contains(&s)));
    }

    #[test]
    fn snap_within_t_over_beta() {
        let qt = Quadtree::new(2, 20.0, vec![3, 5], vec![1.0, 37.0, 640.0]);
        for a in 0..3 {
            let d = qt.denom(a);
            for x in 1..40 {
                for y in [1, 7, 19] {
                    let p = pt(&[x, y]);
                    let c = qt.snap(a, &p);
                    let scaled: Vec<i64> = p.coords.iter().map(|v| v * d).collect();
                    let dist = l1(&scaled, &c.coords) as f64 / d as f64;
                    assert!(dist <= qt.anchors[a] / qt.beta, "anchor {a} p {p:?}");
                }
            }
        }
    }

    #[test]
    fn keys_round_trip() {
        let qt = Quadtree::new(2, 20.0, vec![3, 5], vec![1.0, 37.0, 640.0]);
        for a in 0..3 {
            for x in 1..30 {
                let p = pt(&[x, 31 - x]);
                assert_eq!(qt.key_to_vertex(a, &qt.vertex_key(a, &p)), qt.snap(a, &p));
            }
        }
    }

    #[test]
    fn single_point_cost_zero() {
        let qt = Quadtree::new(1, 10.0, vec![0], vec![1.0, 4.0]);
        let m = PointMultiset::from_points(1, [pt(&[3])]).unwrap();
        assert_eq!(qt.cost(&m), 0.0);
    }

    #[test]
    fn one_cell_gives_single_vertex() {
        let qt = Quadtree::new(1, 1.0, vec![0], vec![1024.0]);
        let m = PointMultiset::from_points(1, (1..=10).map(|x| pt(&[x]))).unwrap();
        let v = qt.vertex_set(0, &m);
        assert_eq!(v.len(), 1);
        assert_eq!(*v.vertices.values().next().unwrap(), 10);
    }
}
