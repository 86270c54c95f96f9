use super::{LevelGraph, Sweep};
use crate::error::{Error, Result};
use crate::geometry::PointMultiset;
use crate::harness::oracle::mst_cost;
use crate::quadtree::{LevelStructure, Quadtree};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub size_threshold: f64,
    pub bfs_rounds: u32,
    pub log_l: u32,
}

impl EstimatorParams {
    pub fn new(size_threshold: f64, bfs_rounds: u32, levels: &LevelStructure) -> Self {
        EstimatorParams { size_threshold, bfs_rounds, log_l: levels.log_l() }
    }

    /// β²Δ^{10ε}: the threshold the analysis calls for.
    pub fn faithful_threshold(beta: f64, big_delta: u64, epsilon: f64) -> f64 {
        beta * beta * (big_delta as f64).powf(10.0 * epsilon)
    }

    pub fn unbounded(levels: &LevelStructure) -> Self {
        EstimatorParams { size_threshold: f64::INFINITY, bfs_rounds: u32::MAX, log_l: levels.log_l() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTerm {
    pub t: f64,
    pub vertices: usize,
    /// Σ_p of the per-vertex quantity (x, or min(y,z)).
    pub sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZBreakdown {
    pub value: f64,
    pub n: usize,
    pub levels: Vec<LevelTerm>,
}

fn assemble(n: f64, delta: f64, levels: &LevelStructure, terms: Vec<LevelTerm>, support: usize) -> ZBreakdown {
    let top = (1.0 + delta).powi(levels.big_l as i32 + 1);
    let sum: f64 = terms.iter().map(|l| l.t * l.sum).sum();
    ZBreakdown { value: n - top + delta * sum, n: support, levels: terms }
}

/// Visit every level with its threshold graph, block by block.
fn for_each_level(
    qt: &Quadtree,
    levels: &LevelStructure,
    p: &PointMultiset,
    mut f: impl FnMut(usize, &super::ThresholdGraphView<'_>),
) {
    for block in 0..levels.anchors.len() {
        let graph = LevelGraph::new(&qt.vertex_set(block, p));
        let mut sweep = Sweep::new(&graph);
        for (i, &t) in levels.levels.iter().enumerate() {
            if levels.block_of[i] != block {
                continue;
            }
            sweep.advance(t);
            let view = sweep.view();
            f(i, &view);
        }
    }
}

/// n − (1+δ)^{L+1} + δ·Σ_t t·Σ_p min(y_t(p), z_t(p)).
pub fn estimator_z(
    qt: &Quadtree,
    levels: &LevelStructure,
    delta: f64,
    p: &PointMultiset,
    params: &EstimatorParams,
) -> ZBreakdown {
    let mut terms = vec![LevelTerm { t: 0.0, vertices: 0, sum: 0.0 }; levels.levels.len()];
    for_each_level(qt, levels, p, |i, view| {
        let sum = (0..view.len()).map(|v| view.min_yz(v, params)).sum();
        terms[i] = LevelTerm { t: levels.levels[i], vertices: view.len(), sum };
    });
    assemble(p.support() as f64, delta, levels, terms, p.support())
}

/// n − (1+δ)^{L+1} + δ·Σ_t t·Σ_p x_t(p) = ... + δ·Σ_t t·c_t.
pub fn ideal_estimator(qt: &Quadtree, levels: &LevelStructure, delta: f64, p: &PointMultiset) -> ZBreakdown {
    let mut terms = vec![LevelTerm { t: 0.0, vertices: 0, sum: 0.0 }; levels.levels.len()];
    for_each_level(qt, levels, p, |i, view| {
        terms[i] =
            LevelTerm { t: levels.levels[i], vertices: view.len(), sum: view.components.count() as f64 };
    });
    assemble(p.support() as f64, delta, levels, terms, p.support())
}

#[derive(Clone, Debug)]
pub enum SampleMode {
    /// k draws per level, uniform over distinct vertices, with replacement.
    Uniform(usize),
    /// Every vertex exactly once.
    Exhaustive,
}

/// The sampled estimator Ẑ. `hat_n` maps a level index and its exact
/// vertex count to the size estimate used for that level; index 0 also
/// supplies n̂.
pub fn sampled_estimator<R: Rng>(
    qt: &Quadtree,
    levels: &LevelStructure,
    delta: f64,
    p: &PointMultiset,
    params: &EstimatorParams,
    mode: &SampleMode,
    hat_n: &dyn Fn(usize, usize) -> f64,
    rng: &mut R,
) -> ZBreakdown {
    let mut terms = vec![LevelTerm { t: 0.0, vertices: 0, sum: 0.0 }; levels.levels.len()];
    for_each_level(qt, levels, p, |i, view| {
        let nv = view.len();
        let mean = match mode {
            SampleMode::Exhaustive => (0..nv).map(|v| view.min_yz(v, params)).sum::<f64>() / nv as f64,
            SampleMode::Uniform(k) => {
                (0..*k).map(|_| view.min_yz(rng.gen_range(0..nv), params)).sum::<f64>() / *k as f64
            }
        };
        let nh = if nv == 1 { 1.0 } else { hat_n(i, nv) };
        terms[i] = LevelTerm { t: levels.levels[i], vertices: nv, sum: nh * mean };
    });
    let n_hat = if p.support() == 1 { 1.0 } else { hat_n(0, p.support()) };
    assemble(n_hat, delta, levels, terms, p.support())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsCheck {
    pub value: f64,
    pub mst: u64,
    pub h: u32,
    pub big_delta: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Evaluate n − Δ + ε·Σ_{i<h} (1+ε)^i·c_{(1+ε)^i} on the undiscretized
/// threshold graphs, with Δ = (1+ε)^h the smallest such power covering the
/// diameter.
pub fn cs_sandwich_check(p: &PointMultiset, epsilon: f64) -> Result<CsCheck> {
    if p.is_empty() {
        return Err(Error::Empty);
    }
    if epsilon <= 0.0 {
        return crate::error::config("ε must be positive");
    }
    let pts = p.distinct();
    let graph = LevelGraph::from_points(&pts);
    let diam = p.diameter() as f64;
    let base = 1.0 + epsilon;
    let mut h = 0u32;
    while base.powi(h as i32) < diam * (1.0 - 1e-12) {
        h += 1;
    }
    let big_delta = base.powi(h as i32);
    let mut sweep = Sweep::new(&graph);
    let mut sum = 0.0;
    for i in 0..h {
        let t = base.powi(i as i32);
        sweep.advance(t);
        sum += t * sweep.view().components.count() as f64;
    }
    let value = pts.len() as f64 - big_delta + epsilon * sum;
    let mst = mst_cost(p)?;
    let tol = 1e-9 * (mst as f64).max(1.0);
    Ok(CsCheck {
        value,
        mst,
        h,
        big_delta,
        lower_ok: mst as f64 <= value + tol,
        upper_ok: value <= (1.0 + epsilon) * mst as f64 + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn line(xs: &[i64]) -> PointMultiset {
        PointMultiset::from_points(1, xs.iter().map(|&x| Point::new(vec![x]))).unwrap()
    }

    #[test]
    fn cs_example_one_two_four() {
        let c = cs_sandwich_check(&line(&[1, 2, 4]), 1.0).unwrap();
        assert_eq!(c.h, 2);
        assert_eq!(c.value, 3.0);
        assert_eq!(c.mst, 3);
        assert!(c.lower_ok && c.upper_ok);
    }

    #[test]
    fn cs_two_points_closed_form() {
        for d in [1i64, 3, 8, 27, 64] {
            let c = cs_sandwich_check(&line(&[1, 1 + d]), 0.5).unwrap();
            // c_t = 2 for t < d, so the sum telescopes to 2((1+ε)^h − 1)/ε.
            let closed = 2.0 - c.big_delta + 2.0 * (c.big_delta - 1.0);
            assert!((c.value - closed).abs() < 1e-9);
            assert!(c.value >= d as f64 - 1e-9 && c.value <= 1.5 * d as f64 + 1e-9);
        }
    }

    #[test]
    fn single_point_z_is_zero() {
        let qt = Quadtree::new(1, 100.0, vec![0], vec![1.0, 4.0]);
        let ls = LevelStructure::geometric(16, 0.01, 0.5);
        let p = line(&[5]);
        let z = estimator_z(&qt, &ls, 0.01, &p, &EstimatorParams::new(64.0, 2, &ls));
        assert!(z.value.abs() < 1e-6, "{}", z.value);
        assert_eq!(z.n, 1);
    }
}
