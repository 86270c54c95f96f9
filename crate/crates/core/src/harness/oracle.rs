//! Brute-force exact references.

use crate::error::{Error, Result};
use crate::geometry::{l1, Point, PointMultiset};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MstResult {
    pub cost: u64,
    pub edges: Vec<(Point, Point, u64)>,
}

/// Prim's algorithm over distinct points; ties broken by the
/// lexicographically smaller vertex index.
pub fn mst_oracle(p: &PointMultiset) -> Result<MstResult> {
    if p.is_empty() {
        return Err(Error::Empty);
    }
    let pts = p.distinct();
    let n = pts.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![u64::MAX; n];
    let mut from = vec![usize::MAX; n];
    best[0] = 0;
    let mut cost = 0;
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        if from[u] != usize::MAX {
            cost += best[u];
            let (a, b) = if from[u] < u { (from[u], u) } else { (u, from[u]) };
            edges.push((pts[a].clone(), pts[b].clone(), best[u]));
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = l1(&pts[u].coords, &pts[v].coords);
                if d < best[v] {
                    best[v] = d;
                    from[v] = u;
                }
            }
        }
    }
    Ok(MstResult { cost, edges })
}

pub fn mst_cost(p: &PointMultiset) -> Result<u64> {
    Ok(mst_oracle(p)?.cost)
}

/// Kruskal over all pairs, an independent second route to the same cost.
pub fn mst_kruskal(p: &PointMultiset) -> Result<u64> {
    if p.is_empty() {
        return Err(Error::Empty);
    }
    let pts = p.distinct();
    let n = pts.len();
    let mut pairs = Vec::with_capacity(n * n / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((l1(&pts[i].coords, &pts[j].coords), i, j));
        }
    }
    pairs.sort_unstable();
    let mut uf = crate::components::UnionFind::new(n);
    let mut cost = 0;
    for (d, i, j) in pairs {
        if uf.union(i, j) {
            cost += d;
        }
    }
    Ok(cost)
}

pub fn diameter(p: &PointMultiset) -> Result<u64> {
    if p.is_empty() {
        return Err(Error::Empty);
    }
    Ok(p.diameter())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[i64]) -> PointMultiset {
        PointMultiset::from_points(1, xs.iter().map(|&x| Point::new(vec![x]))).unwrap()
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(mst_cost(&line(&[1, 6])).unwrap(), 5);
        assert_eq!(mst_cost(&line(&[1, 2, 4])).unwrap(), 3);
        assert!(mst_cost(&PointMultiset::new(1)).is_err());
        let r = mst_oracle(&line(&[1, 2, 4])).unwrap();
        assert_eq!(r.edges.len(), 2);
    }

    #[test]
    fn duplicates_do_not_change_cost() {
        let mut m = line(&[1, 5, 9]);
        m.insert(Point::new(vec![5]), 3).unwrap();
        assert_eq!(mst_cost(&m).unwrap(), 8);
        assert_eq!(mst_kruskal(&m).unwrap(), 8);
    }
}
