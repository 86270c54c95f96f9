//! Seeded instance generators.

use crate::error::{config, Error, Result};
use crate::geometry::{Point, PointMultiset, StreamFile};
use crate::rng::seq_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const GENERATOR_VERSION: &str = "gen-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    Uniform,
    Clustered { clusters: usize, spread: i64 },
    Cantor,
    Grid { step: i64 },
    File { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub generator: Generator,
    pub n: usize,
    pub d: usize,
    pub lambda: i64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub lambda: i64,
    pub points: PointMultiset,
}

impl InstanceSpec {
    /// Parse `name:key=value,key=value`, for example `cantor:n=8` or
    /// `uniform:n=50,d=2,lambda=256`.
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut n = 32usize;
        let mut d = 2usize;
        let mut lambda = 0i64;
        let mut clusters = 4usize;
        let mut spread = 4i64;
        let mut step = 3i64;
        let mut path = None;
        let mut seed = seed;
        for kv in rest.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("bad generator option `{kv}`")))?;
            let num = || v.parse::<i64>().map_err(|_| Error::Config(format!("bad value for `{k}`: {v}")));
            match k {
                "n" => n = num()? as usize,
                "d" => d = num()? as usize,
                "lambda" => lambda = num()?,
                "clusters" | "k" => clusters = num()? as usize,
                "spread" => spread = num()?,
                "step" => step = num()?,
                "seed" => seed = num()? as u64,
                "path" => path = Some(v.to_string()),
                _ => return config(format!("unknown generator option `{k}`")),
            }
        }
        let generator = match name {
            "uniform" => Generator::Uniform,
            "clustered" => Generator::Clustered { clusters, spread },
            "cantor" => {
                d = 1;
                Generator::Cantor
            }
            "grid" => Generator::Grid { step },
            "file" => Generator::File { path: path.ok_or(Error::Config("file generator needs path=".into()))? },
            _ => return config(format!("unknown generator `{name}`")),
        };
        if n == 0 || d == 0 {
            return config("n and d must be positive");
        }
        if lambda == 0 {
            lambda = match generator {
                Generator::Cantor => n as i64,
                _ => default_lambda(n, d),
            };
        }
        Ok(InstanceSpec { generator, n, d, lambda, seed })
    }

    pub fn generate(&self) -> Result<Instance> {
        let mut rng = seq_rng(self.seed, 0x47454E);
        let (lambda, points) = match &self.generator {
            Generator::Uniform => (self.lambda, uniform(self.n, self.d, self.lambda, &mut rng)?),
            Generator::Clustered { clusters, spread } => {
                (self.lambda, clustered(self.n, self.d, self.lambda, *clusters, *spread, &mut rng)?)
            }
            Generator::Cantor => {
                let p = cantor(self.n)?;
                (p.max_coord(), p)
            }
            Generator::Grid { step } => grid(self.n, self.d, *step)?,
            Generator::File { path } => {
                let f = StreamFile::parse(std::io::BufReader::new(std::fs::File::open(path)?))?;
                (f.lambda, f.multiset()?)
            }
        };
        Ok(Instance { spec: self.clone(), lambda, points })
    }

    pub fn label(&self) -> String {
        match &self.generator {
            Generator::Uniform => format!("uniform:n={},d={},lambda={}", self.n, self.d, self.lambda),
            Generator::Clustered { clusters, spread } => format!(
                "clustered:n={},d={},lambda={},clusters={clusters},spread={spread}",
                self.n, self.d, self.lambda
            ),
            Generator::Cantor => format!("cantor:n={}", self.n),
            Generator::Grid { step } => format!("grid:n={},d={},step={step}", self.n, self.d),
            Generator::File { path } => format!("file:path={path}"),
        }
    }
}

fn default_lambda(n: usize, d: usize) -> i64 {
    let side = (4.0 * n as f64).powf(1.0 / d as f64).ceil() as i64;
    (side.max(8) as u64).next_power_of_two() as i64
}

/// n distinct points uniform in [1,Λ]^d.
pub fn uniform<R: Rng>(n: usize, d: usize, lambda: i64, rng: &mut R) -> Result<PointMultiset> {
    if (lambda as f64).powi(d as i32) < n as f64 {
        return config("Λ^d is smaller than n");
    }
    let mut seen = BTreeSet::new();
    while seen.len() < n {
        seen.insert(Point::new((0..d).map(|_| rng.gen_range(1..=lambda)).collect()));
    }
    PointMultiset::from_points(d, seen)
}

/// n distinct points in `clusters` tight groups around uniform centers.
pub fn clustered<R: Rng>(
    n: usize,
    d: usize,
    lambda: i64,
    clusters: usize,
    spread: i64,
    rng: &mut R,
) -> Result<PointMultiset> {
    let clusters = clusters.max(1);
    let centers: Vec<Vec<i64>> =
        (0..clusters).map(|_| (0..d).map(|_| rng.gen_range(1..=lambda)).collect()).collect();
    let mut seen = BTreeSet::new();
    let mut attempts = 0usize;
    while seen.len() < n {
        attempts += 1;
        if attempts > 1000 * n + 10_000 {
            return config("clustered generator cannot place n distinct points; raise spread or Λ");
        }
        let c = &centers[rng.gen_range(0..clusters)];
        let coords: Vec<i64> = c.iter().map(|&x| (x + rng.gen_range(-spread..=spread)).clamp(1, lambda)).collect();
        seen.insert(Point::new(coords));
    }
    PointMultiset::from_points(d, seen)
}

/// The hierarchical pairing instance on the line: C_0 = {0} and
/// C_k = C_{k-1} ∪ (C_{k-1} + span(C_{k-1}) + 2^{k-1}), shifted to start
/// at 1. Merges happen at gaps 1, 2, 4, ... and the MST costs k·2^{k-1}.
pub fn cantor(n: usize) -> Result<PointMultiset> {
    if !n.is_power_of_two() {
        return config("cantor instance needs n a power of two");
    }
    let mut xs = vec![0i64];
    let mut gap = 1i64;
    while xs.len() < n {
        let span = *xs.last().unwrap();
        let shifted: Vec<i64> = xs.iter().map(|&x| x + span + gap).collect();
        xs.extend(shifted);
        gap *= 2;
    }
    PointMultiset::from_points(1, xs.into_iter().map(|x| Point::new(vec![x + 1])))
}

/// First n points of a regular grid with the given step, row-major.
pub fn grid(n: usize, d: usize, step: i64) -> Result<(i64, PointMultiset)> {
    let side = (n as f64).powf(1.0 / d as f64).ceil() as i64;
    let mut pts = Vec::with_capacity(n);
    let mut idx = vec![0i64; d];
    'outer: loop {
        if pts.len() == n {
            break;
        }
        pts.push(Point::new(idx.iter().map(|&i| 1 + i * step).collect()));
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < side {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    let lambda = 1 + (side - 1) * step;
    Ok((lambda.max(1), PointMultiset::from_points(d, pts)?))
}

/// A stream that reaches `target` through inserts, decoy inserts and their
/// deletions, in shuffled order.
pub fn turnstile_stream<R: Rng>(target: &PointMultiset, lambda: i64, decoys: usize, rng: &mut R) -> StreamFile {
    use crate::geometry::StreamUpdate;
    let d = target.dim;
    let mut inserts = target.to_updates();
    let mut decoy_pts = Vec::new();
    for _ in 0..decoys {
        let p = Point::new((0..d).map(|_| rng.gen_range(1..=lambda)).collect());
        inserts.push(StreamUpdate::insert(p.clone()));
        decoy_pts.push(p);
    }
    inserts.shuffle(rng);
    let mut updates = inserts;
    for p in decoy_pts {
        updates.push(StreamUpdate::delete(p));
    }
    StreamFile { lambda, dim: d, updates }
}
