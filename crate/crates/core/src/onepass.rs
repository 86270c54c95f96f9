//! The one-pass estimator: per-level trials that pick a hash scale j at
//! random, sample a point through a pair of LSH buckets, and report either
//! 0 (dense neighbourhood) or the inverse size of the point's component
//! inside its bucket. Levels are the powers of two up to Δ.
//!
//! Reference mode reads the vertex set directly. Sketch mode builds, for
//! each iteration, a recursive sampler over x_{b,c,p} (b the coarse bucket,
//! c the fine bucket, p the vertex) and recovers everything from it.

use crate::components::{LevelGraph, ThresholdGraphView};
use crate::error::{config, Result};
use crate::geometry::{l1, Point, PointMultiset};
use crate::lsh::{real_coords, LshFunction};
use crate::quadtree::{pack_key, unpack_key, DiscretizedLevel, LevelStructure, Quadtree, QuadtreeConfig};
use crate::recsampler::{RecSampler, RecSamplerConfig, Triple, Universe};
use crate::rng::{derive, fold128, seq_rng};
use crate::sketch::l0::{rounded_size, L0Estimator};
use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_THRESHOLD: f64 = 32.0;
pub const DEFAULT_SUPPORT_K: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialMode {
    Reference,
    Sketch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnePassConfig {
    pub dim: usize,
    pub lambda: i64,
    pub epsilon: f64,
    /// Diameter bound in input units.
    pub diameter_bound: u64,
    /// Required minimum distance after scaling.
    pub min_distance: f64,
    /// Integer factor applied to every coordinate.
    pub scale: i64,
    /// Diameter bound after scaling, rounded up to a power of two.
    pub big_delta: u64,
    pub tau: u32,
    pub size_threshold: f64,
    pub samples: usize,
    pub retry_budget: usize,
    /// Support capacity of the sketch-mode samplers.
    pub support_k: usize,
    /// Survive only when the whole t-ball shares the bucket, instead of the
    /// anchor-distance tester.
    #[serde(default)]
    pub ball_capture: bool,
    pub seed: u64,
}

/// ⌈log_{1/ε} log₂Δ⌉ + 3.
pub fn tau_for(big_delta: u64, epsilon: f64) -> u32 {
    let lg = (big_delta.max(1) as f64).log2();
    if lg <= 1.0 {
        return 3;
    }
    let x = lg.ln() / (1.0 / epsilon).ln();
    (x - 1e-9).ceil().max(0.0) as u32 + 3
}

/// 10·(1−2ε)^{−2d}·(τ+2) while-iterations.
pub fn default_budget(dim: usize, epsilon: f64, tau: u32) -> usize {
    (10.0 * (1.0 - 2.0 * epsilon).powi(-2 * dim as i32) * (tau + 2) as f64).ceil() as usize
}

impl OnePassConfig {
    pub fn new(dim: usize, lambda: i64, epsilon: f64, diameter_bound: u64, seed: u64) -> Result<Self> {
        let inv = 1.0 / epsilon;
        if !(epsilon > 0.0 && epsilon <= 0.25) || inv.fract() != 0.0 || !(inv as u64).is_power_of_two() {
            return config(format!("ε = {epsilon} must be 1/2^k with ε ≤ 1/4"));
        }
        let mut cfg = OnePassConfig {
            dim,
            lambda,
            epsilon,
            diameter_bound,
            min_distance: inv.powi(3),
            scale: 1,
            big_delta: 1,
            tau: 3,
            size_threshold: DEFAULT_THRESHOLD,
            samples: DEFAULT_SAMPLES,
            retry_budget: 0,
            support_k: DEFAULT_SUPPORT_K,
            ball_capture: false,
            seed,
        };
        cfg.rescale()?;
        Ok(cfg)
    }

    fn rescale(&mut self) -> Result<()> {
        if self.dim == 0 || self.lambda < 1 {
            return config("dimension and Λ must be positive");
        }
        self.scale = self.min_distance.ceil().max(1.0) as i64;
        let d = (self.diameter_bound.max(1) as u128) * self.scale as u128;
        if d > 1u128 << 62 || (self.lambda as i128) * (self.scale as i128) > 1i128 << 62 {
            return config("scaled coordinates overflow");
        }
        self.big_delta = (d as u64).next_power_of_two();
        self.tau = tau_for(self.big_delta, self.epsilon);
        self.retry_budget = default_budget(self.dim, self.epsilon, self.tau);
        Ok(())
    }

    pub fn with_min_distance(mut self, m: f64) -> Result<Self> {
        if !(m >= 1.0) {
            return config("minimum distance must be at least 1");
        }
        self.min_distance = m;
        self.rescale()?;
        Ok(self)
    }

    pub fn with_threshold(mut self, thr: f64) -> Self {
        self.size_threshold = thr;
        self
    }

    pub fn with_samples(mut self, s: usize) -> Self {
        self.samples = s;
        self
    }

    pub fn with_ball_capture(mut self) -> Self {
        self.ball_capture = true;
        self.retry_budget = (10.0 / self.survival() * (self.tau + 2) as f64).ceil() as usize;
        self
    }

    pub fn with_budget(mut self, b: usize) -> Self {
        self.retry_budget = b;
        self
    }

    /// The chance a point survives both testers: (1−2ε)^{2d}, or
    /// ((1−2ε)/(1+2ε))^{2d} under ball capture.
    pub fn survival(&self) -> f64 {
        let e = 2.0 * self.epsilon;
        let one = if self.ball_capture { (1.0 - e) / (1.0 + e) } else { 1.0 - e };
        one.powi(2 * self.dim as i32)
    }

    fn survives(&self, h: &LshFunction, x: &[f64]) -> Result<bool> {
        if self.ball_capture {
            h.captures_ball(x)
        } else {
            h.tester(x)
        }
    }

    pub fn levels(&self) -> LevelStructure {
        LevelStructure::dyadic(self.big_delta, self.epsilon)
    }

    pub fn quadtree_config(&self) -> Result<QuadtreeConfig> {
        QuadtreeConfig::new(self.dim, self.lambda * self.scale, self.big_delta, self.epsilon, 1, self.seed)
    }

    /// Hash scales (coarse-fine order h₁, h₂) used for scale index j.
    pub fn hash_scales(&self, t: f64, j: i32) -> (f64, f64) {
        let inv = 1.0 / self.epsilon;
        if j < 0 {
            (t * inv, t * inv.powi(3))
        } else {
            (t * inv.powi(j), t * inv.powi(j + 2))
        }
    }
}

pub fn scale_points(p: &PointMultiset, scale: i64) -> PointMultiset {
    let mut out = PointMultiset::new(p.dim);
    for (pt, &c) in &p.counts {
        out.counts.insert(Point::new(pt.coords.iter().map(|&x| x * scale).collect()), c);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    VeryDead,
    Type(u32),
    NearlyComplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointClass {
    pub kind: ClassKind,
    /// |B(p, t/ε)| exceeds the threshold: very dead or type 0.
    pub dead: bool,
    /// The ℓ for which p is ℓ-complete, if any.
    pub complete: Option<u32>,
}

impl PointClass {
    pub fn is_very_dead(&self) -> bool {
        self.kind == ClassKind::VeryDead
    }
}

/// Classifies vertex `p` of a level at threshold t.
pub fn classify(view: &ThresholdGraphView<'_>, p: usize, t: f64, cfg: &OnePassConfig) -> PointClass {
    let g = view.g;
    let thr = cfg.size_threshold;
    let inv = 1.0 / cfg.epsilon;
    let big = |r: f64| g.ball_size(p, r) as f64 > thr;
    let dead = big(t * inv);
    let kind = if big(t) {
        ClassKind::VeryDead
    } else {
        (0..=cfg.tau)
            .find(|&l| big(t * inv.powi(l as i32 + 1)) && !big(t * inv.powi(l as i32)))
            .map_or(ClassKind::NearlyComplete, ClassKind::Type)
    };
    let complete = match kind {
        ClassKind::Type(k) if k >= 3 && k - 3 < cfg.tau => {
            let l = k - 3;
            let lim = g.limit(t * inv.powi(l as i32));
            view.components.component_of(p).iter().all(|&q| g.dist(p, q as usize) <= lim).then_some(l)
        }
        _ => None,
    };
    PointClass { kind, dead, complete }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailReason {
    /// The bucket sizes say j is not this point's scale.
    WrongLevel,
    /// The fine bucket is too large to recover.
    Oversized,
    /// The sampled point did not survive both testers.
    Tester,
    /// The sketch could not produce the bucket.
    Sketch,
}

/// One while-iteration: either (z, vertex) or a FAIL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub j: i32,
    /// Index into the level's vertex list.
    pub vertex: Option<usize>,
    pub outcome: std::result::Result<f64, FailReason>,
}

/// A level's vertices with everything a trial needs.
pub struct LevelInput<'g> {
    pub t: f64,
    pub block: usize,
    pub view: ThresholdGraphView<'g>,
    pub coords: Vec<Vec<f64>>,
    pub keys: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl<'g> LevelInput<'g> {
    pub fn new(graph: &'g LevelGraph, t: f64, block: usize, qt: &Quadtree) -> Result<Self> {
        let coords = graph.verts.iter().map(|v| real_coords(v, graph.denom)).collect();
        let keys = graph.verts.iter().map(|v| vertex_key_of(qt, block, v)).collect::<Result<Vec<u64>>>()?;
        let index = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        Ok(LevelInput { t, block, view: graph.view(t), coords, keys, index })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Packed vertex key from snapped numerators.
fn vertex_key_of(qt: &Quadtree, block: usize, v: &Point) -> Result<u64> {
    let e = qt.side_exps[block];
    let key: Vec<i64> = v
        .coords
        .iter()
        .zip(&qt.shift)
        .map(|(&c, &s)| if e >= 1 { (c + s) >> e } else { ((c - 1) >> (1 - e)) + s })
        .collect();
    pack_key(&key)
}

fn bucket_u32(id: u128) -> u32 {
    let h = fold128(id);
    (h ^ (h >> 32)) as u32
}

struct Hashes {
    fine: LshFunction,
    coarse: LshFunction,
}

impl Hashes {
    fn draw(cfg: &OnePassConfig, t: f64, j: i32, seed: u64) -> Result<Self> {
        let (t1, t2) = cfg.hash_scales(t, j);
        let eps = 2.0 * cfg.epsilon;
        Ok(Hashes {
            fine: LshFunction::new(t1, eps, derive(seed, &[0x4831]))?,
            coarse: LshFunction::new(t2, eps, derive(seed, &[0x4832]))?,
        })
    }
}

/// The size gates of the three procedures. `coarse` is |h₂⁻¹(b)| and
/// `fine` is |h₂⁻¹(b) ∩ h₁⁻¹(c)|.
fn gate(j: i32, tau: u32, thr: f64, coarse: usize, fine: usize) -> std::result::Result<bool, FailReason> {
    let big = |n: usize| n as f64 > thr;
    if j < 0 {
        return if big(fine) { Ok(true) } else { Err(FailReason::WrongLevel) };
    }
    if (j as u32) < tau && !big(coarse) {
        return Err(FailReason::WrongLevel);
    }
    if big(fine) {
        return Err(FailReason::Oversized);
    }
    Ok(false)
}

/// One iteration in reference mode. The bucket pair is drawn by drawing a
/// uniform vertex and reading its buckets, which gives b ∝ |h₂⁻¹(b)| and
/// then c ∝ |h₂⁻¹(b) ∩ h₁⁻¹(c)|; that same vertex is the uniform draw
/// from the fine bucket.
pub fn reference_iteration(level: &LevelInput<'_>, cfg: &OnePassConfig, j: i32, seed: u64) -> Result<Iteration> {
    let hs = Hashes::draw(cfg, level.t, j, seed)?;
    let mut rng = seq_rng(seed, 0x5245);
    let p = rng.gen_range(0..level.len());
    let x = &level.coords[p];
    let (b, c) = (hs.coarse.hash(x)?, hs.fine.hash(x)?);
    let (s2, s1) = (cfg.survives(&hs.coarse, x)?, cfg.survives(&hs.fine, x)?);
    let fail = |r| Ok(Iteration { j, vertex: None, outcome: Err(r) });
    if !(s1 && s2) {
        return fail(FailReason::Tester);
    }
    // Buckets have l1 diameter at most scale/(2ε).
    let reach = hs.coarse.t / (2.0 * cfg.epsilon) * (1.0 + 1e-9);
    let mut coarse = 0;
    let mut fine = FixedBitSet::with_capacity(level.len());
    for (q, y) in level.coords.iter().enumerate() {
        let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
        if d > reach || hs.coarse.hash(y)? != b {
            continue;
        }
        coarse += 1;
        if hs.fine.hash(y)? == c {
            fine.insert(q);
        }
    }
    let n_fine = fine.count_ones(..);
    match gate(j, cfg.tau, cfg.size_threshold, coarse, n_fine) {
        Err(r) => fail(r),
        Ok(true) => Ok(Iteration { j, vertex: Some(p), outcome: Ok(0.0) }),
        Ok(false) => {
            let cc = level.view.component_within(p, &fine).count_ones(..);
            Ok(Iteration { j, vertex: Some(p), outcome: Ok(1.0 / cc as f64) })
        }
    }
}

/// One iteration in sketch mode: every vertex is fed to a fresh recursive
/// sampler as x_{b,c,p}, and the iteration reads only the sampler.
pub fn sketch_iteration(
    level: &LevelInput<'_>,
    mult: &[u64],
    qt: &Quadtree,
    cfg: &OnePassConfig,
    j: i32,
    seed: u64,
) -> Result<Iteration> {
    let hs = Hashes::draw(cfg, level.t, j, seed)?;
    let rc = RecSamplerConfig::l0(mult.iter().sum::<u64>().max(3) as usize, 1).with_support_k(cfg.support_k);
    let mut rs = RecSampler::new(rc, Universe::Keyed, derive(seed, &[0x5253]))?;
    for (i, x) in level.coords.iter().enumerate() {
        let b = bucket_u32(hs.coarse.hash(x)?);
        let c = bucket_u32(hs.fine.hash(x)?);
        rs.update(Triple::new(b, c, level.keys[i]), mult[i] as i64)?;
    }
    let fail = |r| Ok(Iteration { j, vertex: None, outcome: Err(r) });
    let Ok(batch) = rs.sample_batch() else { return fail(FailReason::Sketch) };
    let pick = batch.trio(0, 0);
    let (Some(coarse), Some(fine)) =
        (rs.support_with_prefix(pick.i1, None), rs.support_with_prefix(pick.i1, Some(pick.i2)))
    else {
        return fail(FailReason::Sketch);
    };
    let to_point = |key: u64| qt.key_to_vertex(level.block, &unpack_key(key, qt.dim));
    let denom = qt.denom(level.block);
    let p_pt = to_point(pick.i3);
    let x = real_coords(&p_pt, denom);
    let vertex = level.index.get(&pick.i3).copied();
    if !(cfg.survives(&hs.fine, &x)? && cfg.survives(&hs.coarse, &x)?) {
        return fail(FailReason::Tester);
    }
    match gate(j, cfg.tau, cfg.size_threshold, coarse.len(), fine.len()) {
        Err(r) => fail(r),
        Ok(true) => Ok(Iteration { j, vertex, outcome: Ok(0.0) }),
        Ok(false) => {
            let bucket = DiscretizedLevel {
                anchor: qt.anchors[level.block],
                side_exp: qt.side_exps[level.block],
                denom,
                vertices: fine.iter().map(|(tr, _)| (to_point(tr.i3), 1)).collect::<BTreeMap<_, _>>(),
            };
            let g = LevelGraph::new(&bucket);
            let Some(ix) = g.index_of(&p_pt) else { return fail(FailReason::Sketch) };
            let cc = g.view(level.t).components.size_of(ix);
            Ok(Iteration { j, vertex, outcome: Ok(1.0 / cc as f64) })
        }
    }
}

/// Draws j uniformly from [−1, τ] and runs one iteration.
pub fn iteration(
    level: &LevelInput<'_>,
    mult: &[u64],
    qt: &Quadtree,
    cfg: &OnePassConfig,
    mode: TrialMode,
    seed: u64,
) -> Result<Iteration> {
    let j = seq_rng(seed, 0x4A).gen_range(-1..=cfg.tau as i32);
    match mode {
        TrialMode::Reference => reference_iteration(level, cfg, j, seed),
        TrialMode::Sketch => sketch_iteration(level, mult, qt, cfg, j, seed),
    }
}

/// A level sample: retries until success or until the budget runs out.
pub fn level_trial(
    level: &LevelInput<'_>,
    mult: &[u64],
    qt: &Quadtree,
    cfg: &OnePassConfig,
    mode: TrialMode,
    seed: u64,
) -> Result<(Option<(f64, usize)>, Vec<Iteration>)> {
    let mut log = Vec::new();
    for k in 0..cfg.retry_budget {
        let it = iteration(level, mult, qt, cfg, mode, derive(seed, &[k as u64]))?;
        let done = it.outcome.ok().map(|z| (z, it.vertex.unwrap_or(usize::MAX)));
        log.push(it);
        if done.is_some() {
            return Ok((done, log));
        }
    }
    Ok((None, log))
}

/// (4/ε)·Σ_t V̂_t·t·Z_t.
pub fn estimator_r(epsilon: f64, levels: &[f64], v_hat: &[f64], z: &[f64]) -> f64 {
    let s: f64 = levels.iter().zip(v_hat).zip(z).map(|((t, v), z)| v * t * z).sum();
    4.0 / epsilon * s
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OnePassLevel {
    pub t: f64,
    pub vertices: usize,
    pub v_hat: f64,
    /// Mean z over samples that succeeded within the budget.
    pub mean_z: f64,
    pub samples: usize,
    pub dropped: usize,
    pub iterations: usize,
    pub successes: usize,
    pub fails: BTreeMap<String, usize>,
    /// Vertices per class; reference mode only.
    pub classes: BTreeMap<String, usize>,
}

impl OnePassLevel {
    pub fn success_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.successes as f64 / self.iterations as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnePassOutcome {
    /// R in input units.
    pub estimate: f64,
    /// R in scaled units.
    pub scaled_estimate: f64,
    pub levels: Vec<OnePassLevel>,
    /// Every Z_t was zero.
    pub degenerate: bool,
    pub cfg: OnePassConfig,
}

fn class_label(c: &PointClass) -> String {
    match c.kind {
        ClassKind::VeryDead => "very-dead".into(),
        ClassKind::Type(0) => "dead".into(),
        ClassKind::Type(l) => format!("type-{l}"),
        ClassKind::NearlyComplete => "nearly-complete".into(),
    }
}

fn reason_label(r: FailReason) -> &'static str {
    match r {
        FailReason::WrongLevel => "wrong-level",
        FailReason::Oversized => "oversized",
        FailReason::Tester => "tester",
        FailReason::Sketch => "sketch",
    }
}

/// Runs every level on `p` (input units) and assembles R. Sketch mode also
/// estimates V̂_t with an ℓ0 estimator instead of reading |V_t|.
pub fn run_onepass(cfg: &OnePassConfig, p: &PointMultiset, mode: TrialMode) -> Result<OnePassOutcome> {
    if p.is_empty() {
        return Err(crate::Error::Empty);
    }
    let scaled = scale_points(p, cfg.scale);
    let qc = cfg.quadtree_config()?;
    let qt = qc.quadtree();
    let levels = cfg.levels();
    let mut out = vec![OnePassLevel::default(); levels.levels.len()];
    for block in 0..levels.anchors.len() {
        let dl = qt.vertex_set(block, &scaled);
        let graph = LevelGraph::new(&dl);
        let mult: Vec<u64> = dl.vertices.values().copied().collect();
        let v_hat_block = match mode {
            TrialMode::Reference => graph.len() as f64,
            TrialMode::Sketch => {
                let mut est = L0Estimator::new(0.25, derive(cfg.seed, &[0x5648, block as u64]));
                for (pt, &c) in &scaled.counts {
                    est.update(pack_key(&qt.vertex_key(block, pt))? as u128, c as i64);
                }
                rounded_size(est.estimate())
            }
        };
        for (i, &t) in levels.levels.iter().enumerate() {
            if levels.block_of[i] != block {
                continue;
            }
            let level = LevelInput::new(&graph, t, block, &qt)?;
            let lr = &mut out[i];
            lr.t = t;
            lr.vertices = level.len();
            lr.v_hat = v_hat_block;
            if mode == TrialMode::Reference {
                for v in 0..level.len() {
                    *lr.classes.entry(class_label(&classify(&level.view, v, t, cfg))).or_default() += 1;
                }
            }
            let mut sum = 0.0;
            for s in 0..cfg.samples {
                let seed = derive(cfg.seed, &[0x4C56, i as u64, s as u64]);
                let (got, log) = level_trial(&level, &mult, &qt, cfg, mode, seed)?;
                lr.iterations += log.len();
                for it in &log {
                    if let Err(r) = it.outcome {
                        *lr.fails.entry(reason_label(r).into()).or_default() += 1;
                    }
                }
                match got {
                    Some((z, _)) => {
                        lr.successes += 1;
                        lr.samples += 1;
                        sum += z;
                    }
                    None => lr.dropped += 1,
                }
            }
            lr.mean_z = if lr.samples > 0 { sum / lr.samples as f64 } else { 0.0 };
        }
    }
    let ts: Vec<f64> = out.iter().map(|l| l.t).collect();
    let vh: Vec<f64> = out.iter().map(|l| l.v_hat).collect();
    let zs: Vec<f64> = out.iter().map(|l| l.mean_z).collect();
    let scaled_estimate = estimator_r(cfg.epsilon, &ts, &vh, &zs);
    Ok(OnePassOutcome {
        estimate: scaled_estimate / cfg.scale as f64,
        scaled_estimate,
        degenerate: zs.iter().all(|&z| z == 0.0),
        levels: out,
        cfg: cfg.clone(),
    })
}

/// Vertex set of one level of `p` (input units, scaled internally), ready
/// for direct trials.
pub fn level_graph(cfg: &OnePassConfig, p: &PointMultiset, t: f64) -> Result<(Quadtree, usize, LevelGraph, Vec<u64>)> {
    let qt = cfg.quadtree_config()?.quadtree();
    let levels = cfg.levels();
    let i = levels.levels.iter().position(|&x| x >= t).unwrap_or(levels.levels.len() - 1);
    let block = levels.block_of[i];
    let dl = qt.vertex_set(block, &scale_points(p, cfg.scale));
    let mult = dl.vertices.values().copied().collect();
    Ok((qt, block, LevelGraph::new(&dl), mult))
}

/// l1 distance between two vertices of a level, in scaled units.
pub fn vertex_distance(g: &LevelGraph, a: usize, b: usize) -> f64 {
    l1(&g.verts[a].coords, &g.verts[b].coords) as f64 / g.denom as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[i64]]) -> PointMultiset {
        PointMultiset::from_points(v[0].len(), v.iter().map(|c| Point::new(c.to_vec()))).unwrap()
    }

    #[test]
    fn config_checks() {
        assert!(OnePassConfig::new(2, 16, 0.5, 16, 1).is_err());
        assert!(OnePassConfig::new(2, 16, 0.3, 16, 1).is_err());
        let c = OnePassConfig::new(2, 16, 0.25, 20, 1).unwrap();
        assert_eq!(c.scale, 64);
        assert_eq!(c.big_delta, 2048);
        // log₂ 2048 = 11, log₄ 11 ≈ 1.73.
        assert_eq!(c.tau, 5);
        assert_eq!(c.retry_budget, (10.0 * 16.0 * 7.0) as usize);
        assert!(c.tau >= 3);
    }

    #[test]
    fn tau_small_delta() {
        assert_eq!(tau_for(1, 0.25), 3);
        assert_eq!(tau_for(2, 0.25), 3);
        assert_eq!(tau_for(16, 0.25), 4);
        assert_eq!(tau_for(1 << 16, 0.25), 5);
    }

    #[test]
    fn estimator_r_zero_and_linear() {
        assert_eq!(estimator_r(0.25, &[1.0, 2.0], &[3.0, 4.0], &[0.0, 0.0]), 0.0);
        assert_eq!(estimator_r(0.25, &[1.0, 2.0], &[3.0, 4.0], &[1.0, 0.5]), 16.0 * (3.0 + 4.0));
    }

    #[test]
    fn isolated_point_is_nearly_complete() {
        let cfg = OnePassConfig::new(2, 8, 0.25, 8, 1).unwrap();
        let p = pts(&[&[1, 1]]);
        let (qt, block, g, _) = level_graph(&cfg, &p, 1.0).unwrap();
        let level = LevelInput::new(&g, 1.0, block, &qt).unwrap();
        let c = classify(&level.view, 0, 1.0, &cfg);
        assert_eq!(c.kind, ClassKind::NearlyComplete);
        assert!(!c.dead);
    }

    #[test]
    fn dense_cluster_is_very_dead() {
        let cfg = OnePassConfig::new(1, 64, 0.25, 64, 1).unwrap().with_threshold(3.0).with_min_distance(1.0).unwrap();
        let p = pts(&[&[1], &[2], &[3], &[4], &[5], &[60]]);
        let (qt, block, g, _) = level_graph(&cfg, &p, 8.0).unwrap();
        let level = LevelInput::new(&g, 8.0, block, &qt).unwrap();
        let c = classify(&level.view, 0, 8.0, &cfg);
        assert!(c.is_very_dead() && c.dead);
        let far = g.verts.iter().position(|v| v.coords[0] as f64 / g.denom as f64 > 50.0).unwrap();
        assert!(!classify(&level.view, far, 8.0, &cfg).is_very_dead());
    }

    #[test]
    fn singleton_level_returns_one_via_complete_case() {
        let cfg = OnePassConfig::new(2, 8, 0.25, 8, 1).unwrap();
        let p = pts(&[&[3, 3]]);
        let (qt, block, g, mult) = level_graph(&cfg, &p, 4.0).unwrap();
        let level = LevelInput::new(&g, 4.0, block, &qt).unwrap();
        let mut hits = 0;
        for s in 0..200 {
            let it = reference_iteration(&level, &cfg, cfg.tau as i32, s).unwrap();
            match it.outcome {
                Ok(z) => {
                    assert_eq!(z, 1.0);
                    hits += 1;
                }
                Err(r) => assert_eq!(r, FailReason::Tester),
            }
            let sk = sketch_iteration(&level, &mult, &qt, &cfg, cfg.tau as i32, s).unwrap();
            assert!(matches!(sk.outcome, Ok(z) if z == 1.0) || sk.outcome == Err(FailReason::Tester));
        }
        assert!(hits > 0);
        for j in -1..cfg.tau as i32 {
            for s in 0..20 {
                assert!(reference_iteration(&level, &cfg, j, s).unwrap().outcome.is_err());
            }
        }
    }

    #[test]
    fn dead_case_fails_below_threshold() {
        let cfg = OnePassConfig::new(2, 8, 0.25, 8, 1).unwrap();
        let p = pts(&[&[1, 1], &[2, 1], &[1, 2]]);
        let (qt, block, g, _) = level_graph(&cfg, &p, 1.0).unwrap();
        let level = LevelInput::new(&g, 1.0, block, &qt).unwrap();
        for s in 0..100 {
            assert!(reference_iteration(&level, &cfg, -1, s).unwrap().outcome.is_err());
        }
    }

    #[test]
    fn run_on_two_points() {
        let cfg = OnePassConfig::new(1, 32, 0.25, 32, 5).unwrap().with_samples(20);
        let p = pts(&[&[1], &[30]]);
        let out = run_onepass(&cfg, &p, TrialMode::Reference).unwrap();
        assert!(!out.degenerate);
        assert!(out.estimate >= 29.0, "{}", out.estimate);
        assert_eq!(out.levels.len(), cfg.levels().levels.len());
    }

    #[test]
    fn ball_capture_never_returns_very_dead() {
        let base = OnePassConfig::new(1, 256, 0.25, 199, 3).unwrap().with_min_distance(1.0).unwrap().with_threshold(2.0);
        let cfg = base.clone().with_ball_capture();
        assert!((cfg.survival() - (1.0f64 / 3.0).powi(2)).abs() < 1e-12);
        assert!(cfg.retry_budget > base.retry_budget);
        let p = pts(&[&[1], &[2], &[3], &[40]]);
        let (qt, block, g, _) = level_graph(&cfg, &p, 1.0).unwrap();
        let level = LevelInput::new(&g, 1.0, block, &qt).unwrap();
        let q = (0..level.len()).find(|&q| classify(&level.view, q, 1.0, &cfg).is_very_dead()).unwrap();
        for j in 0..=cfg.tau as i32 {
            for s in 0..2000 {
                let it = reference_iteration(&level, &cfg, j, s).unwrap();
                assert!(!(it.outcome.is_ok() && it.vertex == Some(q)), "j = {j}, seed {s}");
            }
        }
    }
}
