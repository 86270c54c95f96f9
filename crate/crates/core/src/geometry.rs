//! Integer points under the l1 metric and turnstile multisets.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<i64>,
}

impl Point {
    pub fn new(coords: Vec<i64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<i64>> for Point {
    fn from(coords: Vec<i64>) -> Self {
        Point { coords }
    }
}

pub fn l1_distance(a: &Point, b: &Point) -> Result<u64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(l1(&a.coords, &b.coords))
}

/// Unchecked l1 distance between equal-length coordinate slices.
#[inline]
pub fn l1(a: &[i64], b: &[i64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Insert,
    Delete,
}

impl Sign {
    pub fn delta(self) -> i64 {
        match self {
            Sign::Insert => 1,
            Sign::Delete => -1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamUpdate {
    pub sign: Sign,
    pub point: Point,
}

impl StreamUpdate {
    pub fn insert(point: Point) -> Self {
        StreamUpdate { sign: Sign::Insert, point }
    }

    pub fn delete(point: Point) -> Self {
        StreamUpdate { sign: Sign::Delete, point }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointMultiset {
    pub dim: usize,
    pub counts: BTreeMap<Point, u64>,
}

impl PointMultiset {
    pub fn new(dim: usize) -> Self {
        PointMultiset { dim, counts: BTreeMap::new() }
    }

    pub fn from_points(dim: usize, pts: impl IntoIterator<Item = Point>) -> Result<Self> {
        let mut m = PointMultiset::new(dim);
        for p in pts {
            m.insert(p, 1)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, p: Point, mult: u64) -> Result<()> {
        self.check_dim(&p)?;
        if mult > 0 {
            *self.counts.entry(p).or_insert(0) += mult;
        }
        Ok(())
    }

    pub fn remove(&mut self, p: &Point) -> Result<()> {
        self.check_dim(p)?;
        match self.counts.get_mut(p) {
            Some(c) if *c > 1 => *c -= 1,
            Some(_) => {
                self.counts.remove(p);
            }
            None => return Err(Error::DeleteAbsent(p.coords.clone())),
        }
        Ok(())
    }

    pub fn apply(&mut self, u: &StreamUpdate) -> Result<()> {
        match u.sign {
            Sign::Insert => self.insert(u.point.clone(), 1),
            Sign::Delete => self.remove(&u.point),
        }
    }

    fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: p.dim() });
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &PointMultiset) -> Result<()> {
        if other.dim != self.dim && !other.is_empty() {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        for (p, &c) in &other.counts {
            *self.counts.entry(p.clone()).or_insert(0) += c;
        }
        Ok(())
    }

    /// Number of distinct points.
    pub fn support(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn distinct(&self) -> Vec<Point> {
        self.counts.keys().cloned().collect()
    }

    pub fn diameter(&self) -> u64 {
        let pts: Vec<&Point> = self.counts.keys().collect();
        let mut best = 0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.max(l1(&pts[i].coords, &pts[j].coords));
            }
        }
        best
    }

    pub fn min_nonzero_distance(&self) -> Option<u64> {
        let pts: Vec<&Point> = self.counts.keys().collect();
        let mut best: Option<u64> = None;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = l1(&pts[i].coords, &pts[j].coords);
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }

    pub fn max_coord(&self) -> i64 {
        self.counts.keys().flat_map(|p| p.coords.iter().copied()).max().unwrap_or(1)
    }

    /// One insertion per unit of multiplicity, in key order.
    pub fn to_updates(&self) -> Vec<StreamUpdate> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for (p, &c) in &self.counts {
            for _ in 0..c {
                out.push(StreamUpdate::insert(p.clone()));
            }
        }
        out
    }
}

pub fn apply_stream(dim: usize, updates: &[StreamUpdate]) -> Result<PointMultiset> {
    let mut m = PointMultiset::new(dim);
    for u in updates {
        m.apply(u)?;
    }
    Ok(m)
}

/// A parsed stream file: header plus updates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamFile {
    pub lambda: i64,
    pub dim: usize,
    pub updates: Vec<StreamUpdate>,
}

impl StreamFile {
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut header: Option<(i64, usize)> = None;
        let mut updates = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = lineno + 1;
            let s = line.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let perr = |msg: &str| Error::Parse { line: line_no, msg: msg.to_string() };
            let mut toks = s.split_whitespace();
            match header {
                None => {
                    let lambda: i64 = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| perr("expected LAMBDA"))?;
                    let dim: usize = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| perr("expected D"))?;
                    if toks.next().is_some() || lambda < 1 || dim < 1 {
                        return Err(perr("header must be `LAMBDA D` with positive values"));
                    }
                    header = Some((lambda, dim));
                }
                Some((lambda, dim)) => {
                    let sign = match toks.next() {
                        Some("+") => Sign::Insert,
                        Some("-") => Sign::Delete,
                        _ => return Err(perr("expected `+` or `-`")),
                    };
                    let coords: Vec<i64> = toks
                        .map(|t| t.parse::<i64>().map_err(|_| perr("bad coordinate")))
                        .collect::<Result<_>>()?;
                    if coords.len() != dim {
                        return Err(perr(&format!("expected {dim} coordinates, got {}", coords.len())));
                    }
                    if let Some(&c) = coords.iter().find(|&&c| c < 1 || c > lambda) {
                        return Err(perr(&format!("coordinate {c} outside [1, {lambda}]")));
                    }
                    updates.push(StreamUpdate { sign, point: Point::new(coords) });
                }
            }
        }
        let (lambda, dim) = header.ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
        Ok(StreamFile { lambda, dim, updates })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.lambda, self.dim);
        for u in &self.updates {
            s.push(match u.sign {
                Sign::Insert => '+',
                Sign::Delete => '-',
            });
            for c in &u.point.coords {
                let _ = write!(s, " {c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn multiset(&self) -> Result<PointMultiset> {
        apply_stream(self.dim, &self.updates)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub points: PointMultiset,
    /// Integer grid step; distances in `points` times `scale` approximate the
    /// original distances.
    pub scale: u64,
}

/// Snap onto a grid of side about εΔ/(nd) and rescale so that the minimum
/// nonzero distance is at least one.
pub fn normalize_aspect(p: &PointMultiset, epsilon: f64, beta: f64) -> Result<Normalized> {
    if p.is_empty() {
        return Err(Error::Empty);
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || beta <= 0.0 {
        return crate::error::config("normalize_aspect needs ε in (0,1) and β > 0");
    }
    let n = p.support() as f64;
    let diam = p.diameter();
    if diam == 0 {
        return Ok(Normalized { points: p.clone(), scale: 1 });
    }
    let t = epsilon * beta * diam as f64 / n;
    let side = t / (p.dim as f64 * beta);
    let s = side.floor() as i64;
    if s <= 1 {
        return Ok(Normalized { points: p.clone(), scale: 1 });
    }
    let mut out = PointMultiset::new(p.dim);
    for (pt, &c) in &p.counts {
        let coords = pt.coords.iter().map(|&x| (x - 1).div_euclid(s) + 1).collect();
        out.insert(Point::new(coords), c)?;
    }
    Ok(Normalized { points: out, scale: s as u64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[i64]) -> Point {
        Point::new(c.to_vec())
    }

    #[test]
    fn distance_examples() {
        assert_eq!(l1_distance(&pt(&[1, 1]), &pt(&[1, 1])).unwrap(), 0);
        assert_eq!(l1_distance(&pt(&[1, 3]), &pt(&[4, 1])).unwrap(), 5);
        assert!(l1_distance(&pt(&[1]), &pt(&[1, 2])).is_err());
    }

    #[test]
    fn stream_counting() {
        let p = pt(&[2, 2]);
        let m = apply_stream(
            2,
            &[StreamUpdate::insert(p.clone()), StreamUpdate::insert(p.clone()), StreamUpdate::delete(p.clone())],
        )
        .unwrap();
        assert_eq!(m.counts.get(&p), Some(&1));
        assert!(apply_stream(2, &[]).unwrap().is_empty());
        assert!(matches!(apply_stream(2, &[StreamUpdate::delete(p)]), Err(Error::DeleteAbsent(_))));
    }

    #[test]
    fn stream_file_round_trip() {
        let text = "# header follows\n16 2\n\n+ 1 2\n+ 3 4\n- 1 2\n";
        let f = StreamFile::parse(text.as_bytes()).unwrap();
        assert_eq!(f.lambda, 16);
        assert_eq!(f.updates.len(), 3);
        let again = StreamFile::parse(f.to_text().as_bytes()).unwrap();
        assert_eq!(f, again);
        assert_eq!(f.multiset().unwrap().support(), 1);
    }

    #[test]
    fn stream_file_rejects_bad_lines() {
        assert!(StreamFile::parse("4 1\n+ 9\n".as_bytes()).is_err());
        assert!(StreamFile::parse("4 2\n+ 1\n".as_bytes()).is_err());
        assert!(StreamFile::parse("4 1\n* 1\n".as_bytes()).is_err());
        assert!(StreamFile::parse("".as_bytes()).is_err());
    }

    #[test]
    fn normalize_single_point_unchanged() {
        let m = PointMultiset::from_points(1, [pt(&[5])]).unwrap();
        let n = normalize_aspect(&m, 0.5, 10.0).unwrap();
        assert_eq!(n.points, m);
        assert_eq!(n.scale, 1);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = PointMultiset::from_points(1, [pt(&[1]), pt(&[2])]).unwrap();
        let b = PointMultiset::from_points(1, [pt(&[2])]).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.counts[&pt(&[2])], 2);
        assert_eq!(a.total(), 3);
    }
}
