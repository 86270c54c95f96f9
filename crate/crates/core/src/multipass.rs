//! The α-pass estimator: vertex samples in one pass, then sparse-ball and
//! bounded BFS recovery over the following passes, all from linear sketches.

use crate::components::{dist_limit, EstimatorParams, LevelGraph, LevelTerm, ZBreakdown};
use crate::error::{config, Error, Result};
use crate::geometry::{l1, Point, PointMultiset, StreamFile, StreamUpdate};
use crate::quadtree::{pack_key, unpack_key, DiscretizedLevel, LevelStructure, Quadtree, QuadtreeConfig};
use crate::rng::derive;
use crate::sketch::ksparse::{Decoded, KSparse, DEFAULT_FAIL};
use crate::sketch::l0::{rounded_size, L0Estimator, L0Sampler};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

/// Largest recovery sparsity we are willing to allocate for.
pub const MAX_SPARSITY: usize = 1 << 20;

/// A stream that can be read more than once.
pub trait Replay {
    fn replay(&mut self, f: &mut dyn FnMut(&StreamUpdate) -> Result<()>) -> Result<()>;
}

pub struct MemoryReplay<'a> {
    pub updates: &'a [StreamUpdate],
    pub passes: usize,
}

impl<'a> MemoryReplay<'a> {
    pub fn new(updates: &'a [StreamUpdate]) -> Self {
        MemoryReplay { updates, passes: 0 }
    }
}

impl Replay for MemoryReplay<'_> {
    fn replay(&mut self, f: &mut dyn FnMut(&StreamUpdate) -> Result<()>) -> Result<()> {
        self.passes += 1;
        self.updates.iter().try_for_each(f)
    }
}

/// Re-reads a stream file on every pass.
pub struct FileReplay {
    pub path: PathBuf,
    pub passes: usize,
}

impl FileReplay {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileReplay { path: path.into(), passes: 0 }
    }
}

impl Replay for FileReplay {
    fn replay(&mut self, f: &mut dyn FnMut(&StreamUpdate) -> Result<()>) -> Result<()> {
        self.passes += 1;
        let file = std::fs::File::open(&self.path)?;
        StreamFile::parse(std::io::BufReader::new(file))?.updates.iter().try_for_each(f)
    }
}

/// Which pass does what. Round 0 only runs when Δ must be estimated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassPlan {
    pub diameter_pass: bool,
    pub alpha: u32,
}

impl PassPlan {
    pub fn new(alpha: u32, diameter_pass: bool) -> Result<Self> {
        if alpha == 0 {
            return config("α must be at least 1");
        }
        Ok(PassPlan { diameter_pass, alpha })
    }

    /// α from a total pass budget: one pass samples, the rest recover.
    pub fn from_budget(passes: u32, diameter_pass: bool) -> Result<Self> {
        let fixed = 1 + diameter_pass as u32;
        if passes <= fixed {
            return config(format!("a budget of {passes} passes leaves no recovery pass"));
        }
        Self::new(passes - fixed, diameter_pass)
    }

    pub fn max_passes(&self) -> u32 {
        self.diameter_pass as u32 + 1 + self.alpha
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaConfig {
    pub qt: QuadtreeConfig,
    pub params: EstimatorParams,
    pub samples: usize,
    pub seed: u64,
    /// Relative accuracy of the support-size estimators.
    pub count_eps: f64,
}

impl AlphaConfig {
    pub fn new(qt: QuadtreeConfig, size_threshold: f64, samples: usize, seed: u64) -> Result<Self> {
        let levels = qt.levels();
        let params = EstimatorParams::new(size_threshold, qt.alpha.max(1), &levels);
        let count_eps = qt.delta;
        let cfg = AlphaConfig { qt, params, samples, seed, count_eps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.qt.validate()?;
        if self.samples == 0 {
            return config("need at least one sample per level");
        }
        if !(self.params.size_threshold >= 1.0) {
            return config("size threshold must be at least 1");
        }
        if self.params.bfs_rounds == 0 {
            return config("α must be at least 1");
        }
        if !(self.count_eps > 0.0 && self.count_eps < 1.0) {
            return config("count accuracy must lie in (0,1)");
        }
        self.sparsity()?;
        Ok(())
    }

    /// ⌈thr⌉ − 1, clipped to the number of grid vertices that can exist.
    pub fn sparsity(&self) -> Result<usize> {
        let thr = self.params.size_threshold;
        let side = (self.qt.lambda + 1) as f64;
        let grid = side.powi(self.qt.dim as i32);
        let k = (thr.ceil() - 1.0).min(grid);
        if k > MAX_SPARSITY as f64 {
            return config(format!("recovery sparsity {k} exceeds {MAX_SPARSITY}"));
        }
        Ok(k as usize)
    }
}

/// Outcome of one (level, sample) trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub level: usize,
    pub sample: usize,
    pub t: f64,
    /// Packed key of the sampled vertex; None when the sampler failed.
    pub vertex: Option<u64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    /// Sketch min(y,z); None when the trial was discarded.
    pub value: Option<f64>,
    /// Number of ball sketches that decoded (a prefix of 0..=log L).
    pub balls_decoded: usize,
    pub hops: u32,
    /// Set when a recovery sketch misbehaved.
    pub flagged: bool,
    pub direct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaOutcome {
    pub estimate: ZBreakdown,
    pub n_hat: f64,
    /// Support estimate per level.
    pub level_n_hat: Vec<f64>,
    pub records: Vec<PairRecord>,
    pub passes: u32,
    pub cells: usize,
}

impl AlphaOutcome {
    fn level_means(&self, levels: usize, pick: impl Fn(&PairRecord) -> Option<f64>) -> Vec<Option<f64>> {
        let mut acc = vec![(0.0, 0usize); levels];
        for r in &self.records {
            if let Some(v) = pick(r) {
                acc[r.level].0 += v;
                acc[r.level].1 += 1;
            }
        }
        acc.into_iter().map(|(s, c)| (c > 0).then(|| s / c as f64)).collect()
    }

    /// Ẑ recomputed with the given counts, using the sketch values.
    pub fn z_with_counts(&self, levels: &LevelStructure, delta: f64, n: f64, level_n: &[f64]) -> f64 {
        let means = self.level_means(levels.levels.len(), |r| r.value);
        assemble(levels, delta, n, level_n, &means, 0).value
    }

    /// Ẑ from the direct values at the same sample points; needs the
    /// records to carry direct values.
    pub fn z_direct(&self, levels: &LevelStructure, delta: f64, n: f64, level_n: &[f64]) -> f64 {
        let means =
            self.level_means(levels.levels.len(), |r| if r.value.is_some() { r.direct } else { None });
        assemble(levels, delta, n, level_n, &means, 0).value
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.value.is_none()).count()
    }
}

fn assemble(
    levels: &LevelStructure,
    delta: f64,
    n_hat: f64,
    level_n: &[f64],
    means: &[Option<f64>],
    support: usize,
) -> ZBreakdown {
    let terms: Vec<LevelTerm> = levels
        .levels
        .iter()
        .enumerate()
        .map(|(i, &t)| LevelTerm {
            t,
            vertices: level_n[i].round() as usize,
            sum: level_n[i] * means[i].unwrap_or(0.0),
        })
        .collect();
    let top = (1.0 + delta).powi(levels.big_l as i32 + 1);
    let sum: f64 = terms.iter().map(|l| l.t * l.sum).sum();
    ZBreakdown { value: n_hat - top + delta * sum, n: support, levels: terms }
}

/// Per-update vertex coordinates and keys at every anchor.
struct Snapper<'a> {
    qt: &'a Quadtree,
}

impl Snapper<'_> {
    fn at(&self, block: usize, p: &Point) -> Result<(Vec<i64>, u64)> {
        let key = pack_key(&self.qt.vertex_key(block, p))?;
        Ok((self.qt.snap(block, p).coords, key))
    }
}

fn check_update(u: &StreamUpdate, dim: usize, lambda: i64) -> Result<()> {
    if u.point.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: u.point.dim() });
    }
    if let Some(&c) = u.point.coords.iter().find(|&&c| c < 0 || c > lambda) {
        return Err(Error::OutOfRange { coord: c, lambda });
    }
    Ok(())
}

/// Round 1: per-(level, sample) ℓ0 samplers over the vertex vectors, a
/// support estimator per block and one over the raw points.
pub fn sample_vertex_pass(
    cfg: &AlphaConfig,
    qt: &Quadtree,
    levels: &LevelStructure,
    stream: &mut dyn Replay,
) -> Result<(Vec<Vec<Option<u64>>>, f64, Vec<f64>, usize)> {
    let blocks = levels.anchors.len();
    let nl = levels.levels.len();
    let mut samplers: Vec<Vec<L0Sampler>> = (0..nl)
        .map(|i| (0..cfg.samples).map(|s| L0Sampler::new(derive(cfg.seed, &[0x534D, i as u64, s as u64]))).collect())
        .collect();
    let mut block_est: Vec<L0Estimator> =
        (0..blocks).map(|b| L0Estimator::new(cfg.count_eps, derive(cfg.seed, &[0x4245, b as u64]))).collect();
    let mut point_est = L0Estimator::new(cfg.count_eps, derive(cfg.seed, &[0x5045]));
    let snap = Snapper { qt };
    let (dim, lambda) = (cfg.qt.dim, cfg.qt.lambda);
    stream.replay(&mut |u| {
        check_update(u, dim, lambda)?;
        let delta = u.sign.delta();
        point_est.update(pack_key(&u.point.coords)? as u128, delta);
        let keys: Vec<u64> = (0..blocks).map(|b| snap.at(b, &u.point).map(|x| x.1)).collect::<Result<_>>()?;
        for (b, est) in block_est.iter_mut().enumerate() {
            est.update(keys[b] as u128, delta);
        }
        for (i, row) in samplers.iter_mut().enumerate() {
            let key = keys[levels.block_of[i]] as u128;
            for s in row {
                s.update(key, delta);
            }
        }
        Ok(())
    })?;
    let cells = samplers.iter().flatten().map(|s| s.cells_used()).sum::<usize>()
        + block_est.iter().map(|e| e.cells_used()).sum::<usize>()
        + point_est.cells_used();
    let picks = samplers.iter().map(|row| row.iter().map(|s| s.sample().map(|k| k as u64)).collect()).collect();
    let n_hat = rounded_size(point_est.estimate());
    let level_n = (0..nl).map(|i| rounded_size(block_est[levels.block_of[i]].estimate())).collect();
    Ok((picks, n_hat, level_n, cells))
}

/// Recovery state of one live trial.
struct Trial {
    level: usize,
    sample: usize,
    block: usize,
    t: f64,
    key: u64,
    coords: Vec<i64>,
    /// Distance numerator limits for balls of radius 2^j·t.
    ball_lim: Vec<u64>,
    t_lim: u64,
    balls: Vec<KSparse>,
    hop: Option<KSparse>,
    explored: Vec<(u64, Vec<i64>)>,
    explored_keys: HashSet<u64>,
    hops: u32,
    y: Option<f64>,
    z: Option<f64>,
    done: bool,
    flagged: bool,
    balls_decoded: usize,
}

impl Trial {
    fn in_neighborhood(&self, key: u64, v: &[i64]) -> bool {
        !self.explored_keys.contains(&key) && self.explored.iter().any(|(_, e)| l1(e, v) <= self.t_lim)
    }
}

fn decode_keys(s: &KSparse) -> Option<Vec<u64>> {
    match s.decode() {
        Decoded::Fail => None,
        Decoded::Sparse(items) => Some(items.into_iter().map(|(i, _)| i as u64).collect()),
    }
}

/// Turns decoded ball contents into y; a decode that disagrees with its
/// ball flags the trial.
fn recover_y_pass(trial: &mut Trial, qt: &Quadtree, thr: f64) {
    let dim = qt.dim;
    let mut sets: Vec<Vec<(u64, Vec<i64>)>> = Vec::new();
    for (j, ball) in trial.balls.iter().enumerate() {
        let Some(keys) = decode_keys(ball) else { break };
        let verts: Vec<(u64, Vec<i64>)> =
            keys.iter().map(|&k| (k, qt.key_to_vertex(trial.block, &unpack_key(k, dim)).coords)).collect();
        if verts.iter().any(|(_, v)| l1(v, &trial.coords) > trial.ball_lim[j]) || !keys.contains(&trial.key) {
            trial.flagged = true;
            break;
        }
        sets.push(verts);
    }
    trial.balls_decoded = sets.len();
    let sparse = sets.iter().take_while(|s| (s.len() as f64) < thr).count();
    if sparse == 0 {
        trial.y = Some(0.0);
        return;
    }
    let ball = &sets[sparse - 1];
    let level = DiscretizedLevel {
        anchor: qt.anchors[trial.block],
        side_exp: qt.side_exps[trial.block],
        denom: qt.denom(trial.block),
        vertices: ball.iter().map(|(_, v)| (Point::new(v.clone()), 1)).collect::<BTreeMap<_, _>>(),
    };
    let g = LevelGraph::new(&level);
    let view = g.view(trial.t);
    let p = g.index_of(&Point::new(trial.coords.clone())).expect("center lies in its own ball");
    trial.y = Some(1.0 / view.components.size_of(p) as f64);
}

/// Folds one decoded BFS hop into the explored set.
fn recover_z_pass(trial: &mut Trial, qt: &Quadtree, thr: f64, alpha: u32) {
    let Some(hop) = trial.hop.take() else { return };
    trial.hops += 1;
    let Some(keys) = decode_keys(&hop) else {
        trial.z = Some(0.0);
        trial.done = true;
        return;
    };
    let mut fresh = Vec::with_capacity(keys.len());
    for k in keys {
        let v = qt.key_to_vertex(trial.block, &unpack_key(k, qt.dim)).coords;
        if !trial.in_neighborhood(k, &v) {
            trial.flagged = true;
        }
        fresh.push((k, v));
    }
    let grew = !fresh.is_empty();
    for (k, v) in fresh {
        trial.explored_keys.insert(k);
        trial.explored.push((k, v));
    }
    let size = trial.explored.len() as f64;
    if size >= thr {
        trial.z = Some(0.0);
        trial.done = true;
    } else if !grew || trial.hops >= alpha {
        trial.z = Some(1.0 / size);
        trial.done = true;
    }
}

fn exact_values(
    qt: &Quadtree,
    levels: &LevelStructure,
    params: &EstimatorParams,
    p: &PointMultiset,
    trials: &[(usize, usize, u64)],
) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for block in 0..levels.anchors.len() {
        let graph = LevelGraph::new(&qt.vertex_set(block, p));
        let mut sweep = crate::components::Sweep::new(&graph);
        for (i, &t) in levels.levels.iter().enumerate() {
            if levels.block_of[i] != block {
                continue;
            }
            sweep.advance(t);
            let view = sweep.view();
            for &(li, s, key) in trials.iter().filter(|x| x.0 == i) {
                let v = qt.key_to_vertex(block, &unpack_key(key, qt.dim));
                if let Some(ix) = graph.index_of(&v) {
                    out.insert((li, s), view.min_yz(ix, params));
                }
            }
        }
    }
    out
}

/// Runs the full α-pass estimator. With `direct`, every trial also carries
/// the exactly computed min(y,z) at its sampled vertex.
pub fn run_alpha_pass(
    cfg: &AlphaConfig,
    stream: &mut dyn Replay,
    direct: Option<&PointMultiset>,
) -> Result<AlphaOutcome> {
    cfg.validate()?;
    let qt = cfg.qt.quadtree();
    let levels = cfg.qt.levels();
    let thr = cfg.params.size_threshold;
    let k_max = cfg.sparsity()?;
    let alpha = cfg.params.bfs_rounds;
    let log_l = cfg.params.log_l as usize;

    let (picks, n_hat, level_n, mut cells) = sample_vertex_pass(cfg, &qt, &levels, stream)?;
    let mut passes = 1;
    let mut records = Vec::new();
    let mut trials = Vec::new();
    for (i, row) in picks.iter().enumerate() {
        let block = levels.block_of[i];
        let t = levels.levels[i];
        let denom = qt.denom(block);
        for (s, pick) in row.iter().enumerate() {
            let Some(key) = *pick else {
                records.push(PairRecord {
                    level: i,
                    sample: s,
                    t,
                    vertex: None,
                    y: None,
                    z: None,
                    value: None,
                    balls_decoded: 0,
                    hops: 0,
                    flagged: true,
                    direct: None,
                });
                continue;
            };
            let coords = qt.key_to_vertex(block, &unpack_key(key, cfg.qt.dim)).coords;
            let ball_lim: Vec<u64> = (0..=log_l).map(|j| dist_limit(t * (j as f64).exp2(), denom)).collect();
            let seed = derive(cfg.seed, &[0x5942, i as u64, s as u64]);
            let balls = (0..=log_l).map(|j| KSparse::new(k_max, DEFAULT_FAIL, derive(seed, &[j as u64]))).collect();
            let hop_seed = derive(cfg.seed, &[0x4846, i as u64, s as u64, 1]);
            let mut explored_keys = HashSet::new();
            explored_keys.insert(key);
            trials.push(Trial {
                level: i,
                sample: s,
                block,
                t,
                key,
                coords: coords.clone(),
                t_lim: ball_lim[0],
                ball_lim,
                balls,
                hop: Some(KSparse::new(k_max.saturating_sub(1), DEFAULT_FAIL, hop_seed)),
                explored: vec![(key, coords)],
                explored_keys,
                hops: 0,
                y: None,
                z: None,
                done: thr <= 1.0,
                flagged: false,
                balls_decoded: 0,
            });
        }
    }

    let blocks = levels.anchors.len();
    let snap = Snapper { qt: &qt };
    let (dim, lambda) = (cfg.qt.dim, cfg.qt.lambda);
    let mut first = true;
    while trials.iter().any(|t| !t.done) {
        stream.replay(&mut |u| {
            check_update(u, dim, lambda)?;
            let delta = u.sign.delta();
            let at: Vec<(Vec<i64>, u64)> = (0..blocks).map(|b| snap.at(b, &u.point)).collect::<Result<_>>()?;
            for tr in trials.iter_mut().filter(|t| !t.done) {
                let (v, key) = &at[tr.block];
                if first {
                    let d = l1(v, &tr.coords);
                    for (j, ball) in tr.balls.iter_mut().enumerate() {
                        if d <= tr.ball_lim[j] {
                            ball.update(*key as u128, delta);
                        }
                    }
                }
                if !tr.done && tr.in_neighborhood(*key, v) {
                    tr.hop.as_mut().expect("live trial has a hop sketch").update(*key as u128, delta);
                }
            }
            Ok(())
        })?;
        passes += 1;
        for tr in trials.iter_mut() {
            if first {
                cells += tr.balls.iter().map(|b| b.cells_used()).sum::<usize>();
                recover_y_pass(tr, &qt, thr);
            }
            if tr.done {
                continue;
            }
            cells += tr.hop.as_ref().map_or(0, |h| h.cells_used());
            recover_z_pass(tr, &qt, thr, alpha);
            if !tr.done {
                let k = k_max.saturating_sub(tr.explored.len());
                let seed = derive(cfg.seed, &[0x4846, tr.level as u64, tr.sample as u64, tr.hops as u64 + 1]);
                tr.hop = Some(KSparse::new(k, DEFAULT_FAIL, seed));
            }
        }
        first = false;
    }
    if thr <= 1.0 {
        for tr in trials.iter_mut() {
            tr.y = Some(0.0);
            tr.z = Some(0.0);
        }
    }

    let exact = match direct {
        Some(p) => {
            let keys: Vec<(usize, usize, u64)> = trials.iter().map(|t| (t.level, t.sample, t.key)).collect();
            Some(exact_values(&qt, &levels, &cfg.params, p, &keys))
        }
        None => None,
    };
    for tr in trials {
        let z = tr.z.unwrap_or(0.0);
        let value = if z == 0.0 { 0.0 } else { tr.y.unwrap_or(0.0).min(z) };
        records.push(PairRecord {
            level: tr.level,
            sample: tr.sample,
            t: tr.t,
            vertex: Some(tr.key),
            y: tr.y,
            z: tr.z,
            value: Some(value),
            balls_decoded: tr.balls_decoded,
            hops: tr.hops,
            flagged: tr.flagged,
            direct: exact.as_ref().and_then(|m| m.get(&(tr.level, tr.sample)).copied()),
        });
    }
    records.sort_by_key(|r| (r.level, r.sample));

    let mut outcome = AlphaOutcome {
        estimate: ZBreakdown { value: 0.0, n: 0, levels: Vec::new() },
        n_hat,
        level_n_hat: level_n,
        records,
        passes,
        cells,
    };
    let means = outcome.level_means(levels.levels.len(), |r| r.value);
    outcome.estimate = assemble(&levels, cfg.qt.delta, n_hat, &outcome.level_n_hat, &means, n_hat.round() as usize);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::estimator_z;

    fn instance() -> (PointMultiset, Vec<StreamUpdate>) {
        let pts = [[0, 0], [1, 0], [3, 1], [9, 9], [10, 9], [30, 2], [31, 3], [60, 60]];
        let mut ups: Vec<StreamUpdate> =
            pts.iter().map(|c| StreamUpdate::insert(Point::new(c.to_vec()))).collect();
        ups.push(StreamUpdate::insert(Point::new(vec![5, 5])));
        ups.push(StreamUpdate::delete(Point::new(vec![5, 5])));
        let p = PointMultiset::from_points(2, pts.iter().map(|c| Point::new(c.to_vec()))).unwrap();
        (p, ups)
    }

    fn alpha_cfg(alpha: u32, thr: f64, seed: u64) -> AlphaConfig {
        let qt = QuadtreeConfig::new(2, 64, 128, 0.5, alpha, seed).unwrap();
        AlphaConfig::new(qt, thr, 2, seed).unwrap()
    }

    #[test]
    fn sketch_values_match_direct_values() {
        let (p, ups) = instance();
        for (alpha, thr) in [(1, 4.0), (2, 3.0), (3, 1000.0)] {
            let cfg = alpha_cfg(alpha, thr, 7 + alpha as u64);
            let mut replay = MemoryReplay::new(&ups);
            let out = run_alpha_pass(&cfg, &mut replay, Some(&p)).unwrap();
            for r in &out.records {
                assert!(!r.flagged, "{r:?}");
                assert_eq!(r.value, r.direct, "{r:?}");
            }
            assert!(out.passes as u32 <= 1 + alpha);
            assert_eq!(replay.passes as u32, out.passes);
        }
    }

    #[test]
    fn exact_counts_reproduce_direct_estimate() {
        let (p, ups) = instance();
        let cfg = alpha_cfg(2, 5.0, 3);
        let out = run_alpha_pass(&cfg, &mut MemoryReplay::new(&ups), Some(&p)).unwrap();
        let levels = cfg.qt.levels();
        let qt = cfg.qt.quadtree();
        let level_n: Vec<f64> =
            (0..levels.levels.len()).map(|i| qt.vertex_set(levels.block_of[i], &p).len() as f64).collect();
        let n = p.support() as f64;
        let a = out.z_with_counts(&levels, cfg.qt.delta, n, &level_n);
        let b = out.z_direct(&levels, cfg.qt.delta, n, &level_n);
        assert_eq!(a, b);
        assert_eq!(out.n_hat, n);
        assert_eq!(out.level_n_hat, level_n);
    }

    #[test]
    fn all_samples_recover_exact_estimate_when_exhaustive() {
        // A single distinct vertex per level: every sample is that vertex.
        let ups = vec![StreamUpdate::insert(Point::new(vec![4, 4])); 3];
        let p = PointMultiset::from_points(2, vec![Point::new(vec![4, 4])]).unwrap();
        let cfg = alpha_cfg(1, 10.0, 1);
        let out = run_alpha_pass(&cfg, &mut MemoryReplay::new(&ups), None).unwrap();
        let qt = cfg.qt.quadtree();
        let levels = cfg.qt.levels();
        let z = estimator_z(&qt, &levels, cfg.qt.delta, &p, &cfg.params);
        assert!((out.estimate.value - z.value).abs() < 1e-9 * z.value.abs().max(1.0));
    }

    #[test]
    fn pass_budget() {
        assert_eq!(PassPlan::from_budget(3, false).unwrap().alpha, 2);
        assert_eq!(PassPlan::from_budget(3, true).unwrap().alpha, 1);
        assert!(PassPlan::from_budget(1, false).is_err());
        assert_eq!(PassPlan::new(4, true).unwrap().max_passes(), 6);
    }

    #[test]
    fn rejects_out_of_range_points() {
        let ups = vec![StreamUpdate::insert(Point::new(vec![65, 0]))];
        let cfg = alpha_cfg(1, 4.0, 1);
        assert!(matches!(
            run_alpha_pass(&cfg, &mut MemoryReplay::new(&ups), None),
            Err(Error::OutOfRange { .. })
        ));
    }
}
