//! Threshold graphs over discretized levels, connected components, bounded
//! BFS and the per-vertex quantities x_t, y_t, z_t.

mod estimators;

pub use estimators::{
    cs_sandwich_check, estimator_z, ideal_estimator, sampled_estimator, CsCheck, EstimatorParams, LevelTerm,
    SampleMode, ZBreakdown,
};

use crate::geometry::{l1, Point};
use crate::quadtree::DiscretizedLevel;
use fixedbitset::FixedBitSet;

/// Largest distance numerator over `denom` that counts as ≤ r. The small
/// slack absorbs rounding in levels like (1+δ)^i.
pub fn dist_limit(r: f64, denom: i64) -> u64 {
    let x = r * denom as f64;
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        (x + 1e-9 * x.max(1.0)).floor() as u64
    }
}

/// All vertices of one anchor with pairwise distances, ready for threshold
/// queries at any scale. Distances are numerators over `denom`.
#[derive(Clone, Debug)]
pub struct LevelGraph {
    pub verts: Vec<Point>,
    pub mult: Vec<u64>,
    pub denom: i64,
    order: Vec<Vec<(u64, u32)>>,
    pairs: Vec<(u64, u32, u32)>,
}

impl LevelGraph {
    pub fn new(level: &DiscretizedLevel) -> Self {
        let verts: Vec<Point> = level.vertices.keys().cloned().collect();
        let mult = level.vertices.values().copied().collect();
        Self::build(verts, mult, level.denom)
    }

    /// The undiscretized graph on distinct points.
    pub fn from_points(points: &[Point]) -> Self {
        let mut verts = points.to_vec();
        verts.sort();
        verts.dedup();
        let mult = vec![1; verts.len()];
        Self::build(verts, mult, 1)
    }

    fn build(verts: Vec<Point>, mult: Vec<u64>, denom: i64) -> Self {
        let n = verts.len();
        let mut order = Vec::with_capacity(n);
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            let mut row: Vec<(u64, u32)> =
                (0..n).map(|j| (l1(&verts[i].coords, &verts[j].coords), j as u32)).collect();
            row.sort_unstable();
            for &(d, j) in &row {
                if (j as usize) > i {
                    pairs.push((d, i as u32, j));
                }
            }
            order.push(row);
        }
        pairs.sort_unstable();
        LevelGraph { verts, mult, denom, order, pairs }
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn index_of(&self, v: &Point) -> Option<usize> {
        self.verts.binary_search(v).ok()
    }

    /// Largest distance numerator that counts as ≤ r.
    pub fn limit(&self, r: f64) -> u64 {
        dist_limit(r, self.denom)
    }

    pub fn dist(&self, i: usize, j: usize) -> u64 {
        l1(&self.verts[i].coords, &self.verts[j].coords)
    }

    /// Vertices within distance r of `p`, ordered by (distance, index).
    pub fn within(&self, p: usize, r: f64) -> &[(u64, u32)] {
        let lim = self.limit(r);
        let row = &self.order[p];
        &row[..row.partition_point(|&(d, _)| d <= lim)]
    }

    pub fn ball_size(&self, p: usize, r: f64) -> usize {
        self.within(p, r).len()
    }

    /// Ball around `p` of radius r, as sorted indices.
    pub fn ball(&self, p: usize, r: f64) -> Vec<usize> {
        let mut v: Vec<usize> = self.within(p, r).iter().map(|&(_, j)| j as usize).collect();
        v.sort_unstable();
        v
    }

    pub fn ball_set(&self, p: usize, r: f64) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(self.len());
        for &(_, j) in self.within(p, r) {
            s.insert(j as usize);
        }
        s
    }

    pub fn view(&self, t: f64) -> ThresholdGraphView<'_> {
        let mut sweep = Sweep::new(self);
        sweep.advance(t);
        sweep.into_view()
    }
}

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let g = self.parent[self.parent[x] as usize];
            self.parent[x] = g;
            x = g as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        true
    }
}

/// Incremental construction of G_t for non-decreasing t.
pub struct Sweep<'g> {
    g: &'g LevelGraph,
    uf: UnionFind,
    adj: Vec<FixedBitSet>,
    next: usize,
    t: f64,
}

impl<'g> Sweep<'g> {
    pub fn new(g: &'g LevelGraph) -> Self {
        let n = g.len();
        Sweep { g, uf: UnionFind::new(n), adj: vec![FixedBitSet::with_capacity(n); n], next: 0, t: 0.0 }
    }

    pub fn advance(&mut self, t: f64) {
        assert!(t >= self.t, "sweep thresholds must not decrease");
        self.t = t;
        let lim = self.g.limit(t);
        while self.next < self.g.pairs.len() && self.g.pairs[self.next].0 <= lim {
            let (_, i, j) = self.g.pairs[self.next];
            self.uf.union(i as usize, j as usize);
            self.adj[i as usize].insert(j as usize);
            self.adj[j as usize].insert(i as usize);
            self.next += 1;
        }
    }

    pub fn view(&mut self) -> ThresholdGraphView<'_> {
        let components = Components::from_union_find(&mut self.uf);
        ThresholdGraphView { g: self.g, t: self.t, adj: std::borrow::Cow::Borrowed(&self.adj), components }
    }

    fn into_view(mut self) -> ThresholdGraphView<'g> {
        let components = Components::from_union_find(&mut self.uf);
        ThresholdGraphView { g: self.g, t: self.t, adj: std::borrow::Cow::Owned(self.adj), components }
    }
}

/// Partition of the vertex set into connected components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub label: Vec<u32>,
    pub members: Vec<Vec<u32>>,
}

impl Components {
    fn from_union_find(uf: &mut UnionFind) -> Self {
        let n = uf.parent.len();
        let mut root_label = vec![u32::MAX; n];
        let mut label = vec![0u32; n];
        let mut members: Vec<Vec<u32>> = Vec::new();
        for v in 0..n {
            let r = uf.find(v);
            if root_label[r] == u32::MAX {
                root_label[r] = members.len() as u32;
                members.push(Vec::new());
            }
            label[v] = root_label[r];
            members[root_label[r] as usize].push(v as u32);
        }
        Components { label, members }
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn size_of(&self, v: usize) -> usize {
        self.members[self.label[v] as usize].len()
    }

    pub fn component_of(&self, v: usize) -> &[u32] {
        &self.members[self.label[v] as usize]
    }
}

/// G_t on a fixed vertex set: (p,q) adjacent iff 0 < ‖p−q‖₁ ≤ t.
pub struct ThresholdGraphView<'g> {
    pub g: &'g LevelGraph,
    pub t: f64,
    adj: std::borrow::Cow<'g, [FixedBitSet]>,
    pub components: Components,
}

impl<'g> ThresholdGraphView<'g> {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(j)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].ones()
    }

    pub fn x(&self, p: usize) -> f64 {
        1.0 / self.components.size_of(p) as f64
    }

    /// Component of `p` in the subgraph induced on `mask`.
    pub fn component_within(&self, p: usize, mask: &FixedBitSet) -> FixedBitSet {
        let mut seen = FixedBitSet::with_capacity(self.len());
        seen.insert(p);
        let mut frontier = vec![p];
        while let Some(u) = frontier.pop() {
            let mut next = self.adj[u].clone();
            next.intersect_with(mask);
            next.difference_with(&seen);
            for v in next.ones() {
                seen.insert(v);
                frontier.push(v);
            }
        }
        seen
    }

    /// y_t(p): inverse component size inside the largest sparse ball.
    pub fn y(&self, p: usize, params: &EstimatorParams) -> f64 {
        let thr = params.size_threshold;
        if self.g.ball_size(p, self.t) as f64 >= thr {
            return 0.0;
        }
        let mut jstar = 0;
        for j in 1..=params.log_l {
            let r = self.t * (j as f64).exp2();
            if (self.g.ball_size(p, r) as f64) < thr {
                jstar = j;
            } else {
                break;
            }
        }
        let r = self.t * (jstar as f64).exp2();
        let lim = self.g.limit(r);
        let comp = self.components.component_of(p);
        if (comp.len() as f64) < thr && comp.iter().all(|&q| self.g.dist(p, q as usize) <= lim) {
            return 1.0 / comp.len() as f64;
        }
        let mask = self.g.ball_set(p, r);
        1.0 / self.component_within(p, &mask).count_ones(..) as f64
    }

    /// Vertices within `rounds` hops of `p` in BFS order (ascending index
    /// inside each layer), truncated once `cap` vertices are explored.
    pub fn bfs_limited(&self, p: usize, rounds: u32, cap: f64) -> (Vec<usize>, bool) {
        let mut seen = FixedBitSet::with_capacity(self.len());
        seen.insert(p);
        let mut order = vec![p];
        if 1.0 >= cap {
            return (order, true);
        }
        let comp = self.components.size_of(p);
        let mut frontier = vec![p];
        let mut hop = 0;
        while hop < rounds && !frontier.is_empty() && order.len() < comp {
            let mut layer = FixedBitSet::with_capacity(self.len());
            for &u in &frontier {
                layer.union_with(&self.adj[u]);
            }
            layer.difference_with(&seen);
            frontier.clear();
            for v in layer.ones() {
                seen.insert(v);
                order.push(v);
                frontier.push(v);
                if order.len() as f64 >= cap {
                    return (order, true);
                }
            }
            hop += 1;
        }
        (order, false)
    }

    pub fn z(&self, p: usize, params: &EstimatorParams) -> f64 {
        let comp = self.components.size_of(p);
        if (comp as f64) < params.size_threshold && params.bfs_rounds as usize >= comp - 1 {
            return 1.0 / comp as f64;
        }
        let (set, overflow) = self.bfs_limited(p, params.bfs_rounds, params.size_threshold);
        if overflow {
            0.0
        } else {
            1.0 / set.len() as f64
        }
    }

    pub fn min_yz(&self, p: usize, params: &EstimatorParams) -> f64 {
        let z = self.z(p, params);
        if z == 0.0 {
            return 0.0;
        }
        self.y(p, params).min(z)
    }
}

pub fn connected_components(view: &ThresholdGraphView<'_>) -> Components {
    view.components.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[i64]) -> LevelGraph {
        LevelGraph::from_points(&xs.iter().map(|&x| Point::new(vec![x])).collect::<Vec<_>>())
    }

    fn params(thr: f64, rounds: u32) -> EstimatorParams {
        EstimatorParams { size_threshold: thr, bfs_rounds: rounds, log_l: 4 }
    }

    #[test]
    fn small_components() {
        let g = line(&[0, 1, 3]);
        let v = g.view(1.0);
        assert_eq!(v.components.count(), 2);
        assert_eq!(v.components.component_of(0), &[0, 1]);
        assert_eq!(v.components.component_of(2), &[2]);
        assert_eq!(g.view(3.0).components.count(), 1);
    }

    #[test]
    fn x_values() {
        let g = line(&[0, 1, 2, 10]);
        let v = g.view(1.0);
        assert_eq!(v.x(3), 1.0);
        assert!((v.x(0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ball_edges() {
        let g = line(&[0, 1, 3, 7]);
        assert_eq!(g.ball(1, 0.0), vec![1]);
        assert_eq!(g.ball(1, 100.0), vec![0, 1, 2, 3]);
        assert_eq!(g.ball(1, 2.0), vec![0, 1, 2]);
    }

    #[test]
    fn y_dead_and_isolated() {
        let g = line(&[1, 2, 3, 4, 50]);
        let v = g.view(1.0);
        assert_eq!(v.y(1, &params(3.0, 4)), 0.0);
        assert_eq!(v.y(4, &params(3.0, 4)), 1.0);
    }

    #[test]
    fn bfs_on_path() {
        let g = line(&[1, 2, 3, 4, 5]);
        let v = g.view(1.0);
        assert_eq!(v.bfs_limited(2, 0, f64::INFINITY), (vec![2], false));
        let (mut s, of) = v.bfs_limited(0, 2, f64::INFINITY);
        s.sort();
        assert_eq!((s, of), (vec![0, 1, 2], false));
        let (s, of) = v.bfs_limited(2, 2, f64::INFINITY);
        assert_eq!(s, vec![2, 1, 3, 0, 4]);
        assert!(!of);
        assert!(v.bfs_limited(2, 2, 3.0).1);
    }

    #[test]
    fn z_examples() {
        let g = line(&[1, 2, 3, 4, 5, 40]);
        let v = g.view(1.0);
        assert_eq!(v.z(5, &params(3.0, 2)), 1.0);
        assert_eq!(v.z(0, &params(3.0, 2)), 0.0);
        assert!((v.z(0, &params(10.0, 2)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_matches_fresh_views() {
        let g = line(&[1, 2, 4, 8, 9, 15, 30]);
        let mut sweep = Sweep::new(&g);
        for t in [1.0, 2.0, 3.5, 7.0, 16.0] {
            sweep.advance(t);
            let a = sweep.view().components.clone();
            assert_eq!(a, g.view(t).components);
        }
    }
}
