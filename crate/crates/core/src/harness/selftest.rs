//! Invariant suites run by `emst selftest`.

use super::generators::{uniform, InstanceSpec};
use super::oracle::{mst_cost, mst_kruskal};
use super::report::{EstimateReport, Mode};
use super::runner::{run_estimate, Input, RunConfig};
use crate::components::cs_sandwich_check;
use crate::error::Result;
use crate::geometry::PointMultiset;
use crate::multipass::{run_alpha_pass, AlphaConfig, MemoryReplay};
use crate::quadtree::QuadtreeConfig;
use crate::rng::seq_rng;
use crate::sketch::ksparse::{Decoded, KSparse};
use crate::sketch::l0::L0Estimator;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Suite = fn(u64) -> Result<(bool, String)>;

pub const SUITES: &[(&str, Suite)] = &[
    ("oracle-cross-check", oracle_cross_check),
    ("oracle-invariance", oracle_invariance),
    ("report-round-trip", report_round_trip),
    ("ksparse-recovery", ksparse_recovery),
    ("l0-estimate", l0_estimate),
    ("threshold-sandwich", threshold_sandwich),
    ("alpha-sketch-vs-direct", alpha_sketch_vs_direct),
    ("seed-determinism", seed_determinism),
];

pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|&(name, f)| match f(seed) {
            Ok((pass, detail)) => SuiteResult { name, pass, detail },
            Err(e) => SuiteResult { name, pass: false, detail: format!("error: {e}") },
        })
        .collect()
}

fn oracle_cross_check(seed: u64) -> Result<(bool, String)> {
    let mut rng = seq_rng(seed, 1);
    for i in 0..100 {
        let n = rng.gen_range(1..40);
        let d = rng.gen_range(1..4);
        let p = uniform(n, d, 64, &mut rng)?;
        let (a, b) = (mst_cost(&p)?, mst_kruskal(&p)?);
        if a != b {
            return Ok((false, format!("instance {i}: prim {a} kruskal {b}")));
        }
    }
    Ok((true, "100 instances agree".into()))
}

fn oracle_invariance(seed: u64) -> Result<(bool, String)> {
    let mut rng = seq_rng(seed, 2);
    for i in 0..50 {
        let p = uniform(rng.gen_range(2..30), 2, 128, &mut rng)?;
        let base = mst_cost(&p)?;
        let mut pts = p.distinct();
        pts.shuffle(&mut rng);
        let dup = pts[0].clone();
        pts.push(dup);
        let q = PointMultiset::from_points(2, pts)?;
        let c = mst_cost(&q)?;
        if c != base {
            return Ok((false, format!("instance {i}: {base} vs {c} after shuffle and duplicate")));
        }
    }
    Ok((true, "50 instances invariant".into()))
}

fn report_round_trip(seed: u64) -> Result<(bool, String)> {
    let inp = Input::from_spec(&InstanceSpec::parse("uniform:n=20,d=2,lambda=64", seed)?)?;
    let mut cfg = RunConfig::new(Mode::ExactZ, 0.5, seed);
    cfg.oracle = true;
    let r = run_estimate(&inp, &cfg)?;
    let back = EstimateReport::from_json(&r.to_json()).map_err(|e| crate::Error::Config(e.to_string()))?;
    Ok((back == r, format!("ratio {:?}", r.ratio)))
}

fn ksparse_recovery(seed: u64) -> Result<(bool, String)> {
    let mut rng = seq_rng(seed, 3);
    let mut fails = 0;
    for trial in 0..200u64 {
        let k = rng.gen_range(1..20);
        let mut s = KSparse::new(k, 0.01, seed ^ trial);
        let mut truth = std::collections::BTreeMap::new();
        for _ in 0..rng.gen_range(0..=k) {
            let (i, v) = (rng.gen::<u64>() as u128, rng.gen_range(-5i64..=5));
            s.update(i, v);
            *truth.entry(i).or_insert(0) += v;
        }
        // a cancelled extra coordinate leaves the vector unchanged
        s.update(7, 3);
        s.update(7, -3);
        truth.retain(|_, v| *v != 0);
        match s.decode() {
            Decoded::Sparse(got) if got == truth.into_iter().collect::<Vec<_>>() => {}
            _ => fails += 1,
        }
    }
    Ok((fails <= 10, format!("{fails}/200 decodes wrong")))
}

fn l0_estimate(seed: u64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (r, &n) in [10u64, 300, 5000].iter().enumerate() {
        let mut est = L0Estimator::new(0.1, seed ^ r as u64);
        for i in 0..n {
            est.update(i as u128 * 7919, 1);
            est.update(i as u128 * 7919 + 1, 2);
            est.update(i as u128 * 7919 + 1, -2);
        }
        worst = worst.max((est.estimate() / n as f64 - 1.0).abs());
    }
    Ok((worst <= 0.2, format!("worst relative error {worst:.3}")))
}

fn threshold_sandwich(seed: u64) -> Result<(bool, String)> {
    let mut rng = seq_rng(seed, 4);
    for i in 0..30 {
        let p = uniform(rng.gen_range(2..40), rng.gen_range(1..4), 100, &mut rng)?;
        let c = cs_sandwich_check(&p, 0.25)?;
        if !(c.lower_ok && c.upper_ok) {
            return Ok((false, format!("instance {i}: value {} mst {}", c.value, c.mst)));
        }
    }
    Ok((true, "30 instances inside the band".into()))
}

fn alpha_sketch_vs_direct(seed: u64) -> Result<(bool, String)> {
    let inp = Input::from_spec(&InstanceSpec::parse("clustered:n=24,d=2,lambda=64", seed)?)?;
    let qc = QuadtreeConfig::new(2, 64, 128, 0.5, 2, seed)?;
    let cfg = AlphaConfig::new(qc, 24.0, 3, seed)?;
    let out = run_alpha_pass(&cfg, &mut MemoryReplay::new(&inp.updates), Some(&inp.points))?;
    let bad = out.records.iter().filter(|r| r.value.is_some() && r.value != r.direct).count();
    Ok((bad == 0, format!("{bad} of {} recovered values differ", out.records.len())))
}

fn seed_determinism(seed: u64) -> Result<(bool, String)> {
    let inp = Input::from_spec(&InstanceSpec::parse("uniform:n=16,d=2,lambda=32", seed)?)?;
    let mut ok = true;
    for mode in [Mode::Alpha, Mode::Onepass] {
        let mut cfg = RunConfig::new(mode, 0.25, seed);
        cfg.samples = Some(8);
        cfg.size_threshold = Some(16.0);
        ok &= run_estimate(&inp, &cfg)?.to_json() == run_estimate(&inp, &cfg)?.to_json();
    }
    Ok((ok, if ok { "identical".into() } else { "reports differ".into() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in run_all(11) {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }
}
