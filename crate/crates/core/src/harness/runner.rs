//! Drives one estimate run from an instance to a report.

use super::generators::InstanceSpec;
use super::oracle::{diameter, mst_cost};
use super::report::{EstimateReport, LevelDiag, Mode, Params};
use crate::components::{estimator_z, ideal_estimator, EstimatorParams, ZBreakdown};
use crate::error::{config, Result};
use crate::geometry::{PointMultiset, StreamFile, StreamUpdate};
use crate::lsh::diameter_sketch;
use crate::multipass::{run_alpha_pass, AlphaConfig, FileReplay, MemoryReplay, PassPlan};
use crate::onepass::{run_onepass, OnePassConfig, TrialMode};
use crate::quadtree::QuadtreeConfig;
use crate::sketch::pstable::{median_abs, median_abs_monte_carlo};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

pub const SEED_ENV: &str = "EMST_SEED";
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Seed from the environment override, else the built-in default.
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaSource {
    /// Smallest power of two at least the exact diameter.
    Exact,
    /// The LSH diameter sketch.
    Sketch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub epsilon: f64,
    pub alpha: Option<u32>,
    pub passes: Option<u32>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub oracle: bool,
    pub size_threshold: Option<f64>,
    pub delta_source: Option<DeltaSource>,
    /// One-pass trials through the recursive sampler instead of direct reads.
    pub sketch: bool,
    pub timing: bool,
}

impl RunConfig {
    pub fn new(mode: Mode, epsilon: f64, seed: u64) -> Self {
        RunConfig {
            mode,
            epsilon,
            alpha: None,
            passes: None,
            samples: None,
            seed,
            oracle: false,
            size_threshold: None,
            delta_source: None,
            sketch: false,
            timing: false,
        }
    }

    fn delta_source(&self) -> DeltaSource {
        self.delta_source.unwrap_or(match self.mode {
            Mode::Alpha | Mode::Onepass => DeltaSource::Sketch,
            _ => DeltaSource::Exact,
        })
    }

    /// α and the pass plan from --alpha / --passes.
    pub fn plan(&self) -> Result<PassPlan> {
        let diam = self.delta_source() == DeltaSource::Sketch;
        match (self.alpha, self.passes) {
            (Some(a), Some(p)) => {
                let plan = PassPlan::new(a, diam)?;
                if plan.max_passes() > p {
                    return config(format!("α = {a} needs up to {} passes, budget is {p}", plan.max_passes()));
                }
                Ok(plan)
            }
            (Some(a), None) => PassPlan::new(a, diam),
            (None, Some(p)) => PassPlan::from_budget(p, diam),
            (None, None) => PassPlan::new(2, diam),
        }
    }
}

/// Points plus the stream that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Input {
    pub label: String,
    pub lambda: i64,
    pub points: PointMultiset,
    pub updates: Vec<StreamUpdate>,
    /// Stream file to re-read on every pass of the α-pass mode.
    pub path: Option<PathBuf>,
}

impl Input {
    pub fn from_spec(spec: &InstanceSpec) -> Result<Self> {
        let inst = spec.generate()?;
        Ok(Input {
            label: spec.label(),
            lambda: inst.lambda,
            updates: inst.points.to_updates(),
            points: inst.points,
            path: None,
        })
    }

    pub fn from_stream(label: impl Into<String>, f: StreamFile) -> Result<Self> {
        let points = f.multiset()?;
        Ok(Input { label: label.into(), lambda: f.lambda, points, updates: f.updates, path: None })
    }

    pub fn from_path(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let f = StreamFile::parse(BufReader::new(File::open(&path)?))?;
        let mut inp = Input::from_stream(path.display().to_string(), f)?;
        inp.path = Some(path);
        Ok(inp)
    }
}

fn big_delta_for(input: &Input, cfg: &RunConfig, eps: f64) -> Result<(u64, Vec<String>)> {
    let mut warnings = Vec::new();
    let raw = match cfg.delta_source() {
        DeltaSource::Exact => diameter(&input.points)?,
        DeltaSource::Sketch => {
            let est = diameter_sketch(&input.points, input.lambda, eps, cfg.seed ^ 0xD1A)?;
            if est.exhausted {
                warnings.push("diameter sketch found no single-bucket scale".into());
            }
            est.big_delta
        }
    };
    Ok((raw.max(1).next_power_of_two(), warnings))
}

fn z_levels(z: &ZBreakdown) -> Vec<LevelDiag> {
    z.levels
        .iter()
        .map(|l| LevelDiag {
            t: l.t,
            vertices: l.vertices,
            mean: if l.vertices > 0 { l.sum / l.vertices as f64 } else { 0.0 },
            samples: l.vertices,
            ..Default::default()
        })
        .collect()
}

/// One estimate run. The returned report carries the oracle MST and ratio
/// when `cfg.oracle` is set.
pub fn run_estimate(input: &Input, cfg: &RunConfig) -> Result<EstimateReport> {
    let start = Instant::now();
    if input.points.is_empty() {
        return Err(crate::Error::Empty);
    }
    let dim = input.points.dim;
    let mut params = Params { epsilon: cfg.epsilon, dim, lambda: input.lambda, ..Default::default() };
    let mut warnings = Vec::new();
    let (estimate, levels) = match cfg.mode {
        Mode::Exact => (mst_cost(&input.points)? as f64, Vec::new()),
        Mode::Ideal | Mode::ExactZ | Mode::Alpha => {
            let plan = cfg.plan()?;
            let (big_delta, w) = big_delta_for(input, cfg, cfg.epsilon)?;
            warnings.extend(w);
            let qc = QuadtreeConfig::new(dim, input.lambda, big_delta, cfg.epsilon, plan.alpha, cfg.seed)?;
            warnings.extend(qc.warnings());
            let qt = qc.quadtree();
            let levels = qc.levels();
            let thr = cfg
                .size_threshold
                .unwrap_or_else(|| EstimatorParams::faithful_threshold(qc.beta, big_delta, cfg.epsilon));
            params.alpha = plan.alpha;
            params.big_delta = big_delta;
            params.beta = qc.beta;
            params.delta = qc.delta;
            params.size_threshold = thr;
            match cfg.mode {
                Mode::Ideal => {
                    let z = ideal_estimator(&qt, &levels, qc.delta, &input.points);
                    (z.value, z_levels(&z))
                }
                Mode::ExactZ => {
                    let ep = EstimatorParams::new(thr, plan.alpha, &levels);
                    let z = estimator_z(&qt, &levels, qc.delta, &input.points, &ep);
                    (z.value, z_levels(&z))
                }
                _ => {
                    let samples = cfg.samples.unwrap_or(4);
                    let ac = AlphaConfig::new(qc.clone(), thr, samples, cfg.seed)?;
                    let direct = cfg.oracle.then_some(&input.points);
                    let out = match &input.path {
                        Some(path) => run_alpha_pass(&ac, &mut FileReplay::new(path), direct)?,
                        None => run_alpha_pass(&ac, &mut MemoryReplay::new(&input.updates), direct)?,
                    };
                    params.samples = samples;
                    params.passes = out.passes + plan.diameter_pass as u32;
                    let mut diags = Vec::with_capacity(out.estimate.levels.len());
                    for (i, term) in out.estimate.levels.iter().enumerate() {
                        let recs: Vec<_> = out.records.iter().filter(|r| r.level == i).collect();
                        let ok: Vec<f64> = recs.iter().filter_map(|r| r.value).collect();
                        let mut extra = BTreeMap::new();
                        extra.insert("flagged".into(), recs.iter().filter(|r| r.flagged).count() as f64);
                        if cfg.oracle {
                            let mism = recs.iter().filter(|r| r.value.is_some() && r.value != r.direct).count();
                            extra.insert("direct-mismatch".into(), mism as f64);
                        }
                        diags.push(LevelDiag {
                            t: term.t,
                            vertices: qt.vertex_set(levels.block_of[i], &input.points).len(),
                            vertices_estimate: Some(out.level_n_hat[i]),
                            mean: if ok.is_empty() { 0.0 } else { ok.iter().sum::<f64>() / ok.len() as f64 },
                            samples: ok.len(),
                            failures: recs.len() - ok.len(),
                            extra,
                        });
                    }
                    extra_cells(&mut warnings, out.cells);
                    (out.estimate.value, diags)
                }
            }
        }
        Mode::Onepass => {
            let eps = if cfg.epsilon <= 0.25 { cfg.epsilon } else { 0.25 };
            if eps != cfg.epsilon {
                warnings.push(format!("one-pass needs ε = 1/2^k ≤ 1/4; using ε = {eps}"));
            }
            let (bound, w) = big_delta_for(input, cfg, eps)?;
            warnings.extend(w);
            let mut oc = OnePassConfig::new(dim, input.lambda, eps, bound, cfg.seed)?;
            if let Some(s) = cfg.samples {
                oc = oc.with_samples(s);
            }
            if let Some(thr) = cfg.size_threshold {
                oc = oc.with_threshold(thr);
            }
            params.epsilon = eps;
            params.samples = oc.samples;
            params.big_delta = oc.big_delta;
            params.size_threshold = oc.size_threshold;
            params.passes = 1;
            let mode = if cfg.sketch { TrialMode::Sketch } else { TrialMode::Reference };
            let out = run_onepass(&oc, &input.points, mode)?;
            if out.degenerate {
                warnings.push("every level mean was zero".into());
            }
            let diags = out
                .levels
                .iter()
                .map(|l| {
                    let mut extra: BTreeMap<String, f64> =
                        l.classes.iter().map(|(k, &v)| (format!("class:{k}"), v as f64)).collect();
                    extra.extend(l.fails.iter().map(|(k, &v)| (format!("fail:{k}"), v as f64)));
                    extra.insert("success-rate".into(), l.success_rate());
                    extra.insert("survival".into(), oc.survival());
                    extra.insert("dropped".into(), l.dropped as f64);
                    LevelDiag {
                        t: l.t,
                        vertices: l.vertices,
                        vertices_estimate: Some(l.v_hat),
                        mean: l.mean_z,
                        samples: l.samples,
                        failures: l.iterations - l.successes,
                        extra,
                    }
                })
                .collect();
            (out.estimate, diags)
        }
    };
    let mut report = EstimateReport::new(cfg.mode, input.label.clone(), cfg.seed, params, estimate.max(0.0));
    if estimate < 0.0 {
        warnings.push(format!("raw estimate {estimate} clamped to 0"));
    }
    report.levels = levels;
    report.warnings = warnings;
    if cfg.oracle {
        report = report.with_oracle(mst_cost(&input.points)?);
    }
    if cfg.timing {
        report.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

fn extra_cells(warnings: &mut Vec<String>, cells: usize) {
    if cells > 1 << 24 {
        warnings.push(format!("sketches used {cells} cells"));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub p: f64,
    pub median: f64,
    pub monte_carlo: f64,
    pub relative_gap: f64,
}

/// Median of |X| for the p-stable law, closed form beside a Monte Carlo
/// check.
pub fn calibrate(ps: &[f64], draws: usize, seed: u64) -> Vec<CalibrationRow> {
    ps.iter()
        .map(|&p| {
            let median = median_abs(p);
            let monte_carlo = median_abs_monte_carlo(p, draws, seed);
            CalibrationRow { p, median, monte_carlo, relative_gap: (monte_carlo / median - 1.0).abs() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(spec: &str) -> Input {
        Input::from_spec(&InstanceSpec::parse(spec, 3).unwrap()).unwrap()
    }

    #[test]
    fn every_mode_produces_a_report() {
        let inp = input("uniform:n=12,d=2,lambda=32");
        for mode in [Mode::Exact, Mode::Ideal, Mode::ExactZ, Mode::Alpha, Mode::Onepass] {
            let mut cfg = RunConfig::new(mode, 0.5, 9);
            cfg.oracle = true;
            cfg.samples = Some(if mode == Mode::Onepass { 10 } else { 2 });
            cfg.size_threshold = Some(16.0);
            let r = run_estimate(&inp, &cfg).unwrap();
            assert_eq!(r.mode, mode);
            assert!(r.estimate >= 0.0);
            assert!(r.ratio.is_some());
            if mode == Mode::Exact {
                assert_eq!(r.ratio, Some(1.0));
            }
        }
    }

    #[test]
    fn same_seed_same_report() {
        let inp = input("clustered:n=16,d=2,lambda=64");
        let mut cfg = RunConfig::new(Mode::Alpha, 0.5, 4);
        cfg.size_threshold = Some(8.0);
        let a = run_estimate(&inp, &cfg).unwrap().to_json();
        let b = run_estimate(&inp, &cfg).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn file_replay_matches_memory() {
        let inp = input("uniform:n=10,d=2,lambda=32");
        let dir = std::env::temp_dir().join(format!("emst-runner-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.txt");
        let f = StreamFile { lambda: 32, dim: 2, updates: inp.updates.clone() };
        std::fs::write(&path, f.to_text()).unwrap();
        let from_file = Input::from_path(&path).unwrap();
        let mut cfg = RunConfig::new(Mode::Alpha, 0.5, 2);
        cfg.size_threshold = Some(8.0);
        let a = run_estimate(&inp, &cfg).unwrap();
        let b = run_estimate(&from_file, &cfg).unwrap();
        assert_eq!(a.estimate, b.estimate);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn pass_budget_resolution() {
        let mut cfg = RunConfig::new(Mode::Alpha, 0.5, 1);
        cfg.passes = Some(4);
        assert_eq!(cfg.plan().unwrap().alpha, 2);
        cfg.alpha = Some(5);
        assert!(cfg.plan().is_err());
        cfg.mode = Mode::ExactZ;
        cfg.passes = None;
        assert_eq!(cfg.plan().unwrap().alpha, 5);
    }

    #[test]
    fn calibration_close() {
        for row in calibrate(&[1.0, 0.5], 20_000, 1) {
            assert!(row.relative_gap < 0.05, "{row:?}");
        }
    }
}
