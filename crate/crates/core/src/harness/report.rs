//! The JSON report emitted by every estimate run.
//!
//! Field names are frozen; see the README for the schema.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SCHEMA: &str = "emst-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Exact MST from the oracle.
    Exact,
    /// The ideal estimator built from component counts.
    Ideal,
    /// The estimator Z computed exactly from the vertex sets.
    ExactZ,
    /// The sampled estimator with sketch-recovered quantities over α passes.
    Alpha,
    /// The one-pass estimator R.
    Onepass,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Ideal => "ideal",
            Mode::ExactZ => "exact-z",
            Mode::Alpha => "alpha",
            Mode::Onepass => "onepass",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub epsilon: f64,
    pub alpha: u32,
    pub passes: u32,
    pub samples: usize,
    pub big_delta: u64,
    pub beta: f64,
    pub delta: f64,
    pub size_threshold: f64,
    pub dim: usize,
    pub lambda: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelDiag {
    pub t: f64,
    pub vertices: usize,
    /// Size estimate used for this level, when it differs from the exact count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices_estimate: Option<f64>,
    pub mean: f64,
    pub samples: usize,
    pub failures: usize,
    /// Mode-specific counters (class histogram, sketch misfires, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema: String,
    pub mode: Mode,
    pub instance: String,
    pub generator_version: String,
    pub seed: u64,
    pub params: Params,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_mst: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub levels: Vec<LevelDiag>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl EstimateReport {
    pub fn new(mode: Mode, instance: impl Into<String>, seed: u64, params: Params, estimate: f64) -> Self {
        EstimateReport {
            schema: SCHEMA.to_string(),
            mode,
            instance: instance.into(),
            generator_version: super::generators::GENERATOR_VERSION.to_string(),
            seed,
            params,
            estimate,
            oracle_mst: None,
            ratio: None,
            levels: Vec::new(),
            warnings: Vec::new(),
            wall_time_ms: None,
        }
    }

    /// Record the oracle value; the ratio is estimate / MST.
    pub fn with_oracle(mut self, mst: u64) -> Self {
        self.oracle_mst = Some(mst);
        self.ratio = Some(if mst == 0 { if self.estimate == 0.0 { 1.0 } else { f64::INFINITY } } else { self.estimate / mst as f64 });
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EstimateReport {
        let mut r = EstimateReport::new(Mode::ExactZ, "uniform:n=10", 7, Params::default(), 12.375);
        r.levels.push(LevelDiag { t: 1.5, vertices: 3, mean: 0.1 + 0.2, ..Default::default() });
        r.levels[0].extra.insert("fail".into(), 2.0);
        r.with_oracle(11)
    }

    #[test]
    fn round_trip() {
        let r = sample();
        let back = EstimateReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn ratio_only_with_oracle() {
        let r = EstimateReport::new(Mode::Exact, "x", 0, Params::default(), 1.0);
        assert!(!r.to_json().contains("ratio"));
        assert!(sample().to_json().contains("\"ratio\""));
        assert!(!sample().to_json().contains("wall_time_ms"));
    }

    #[test]
    fn mode_names() {
        assert_eq!(serde_json::to_string(&Mode::ExactZ).unwrap(), "\"exact-z\"");
        assert_eq!(serde_json::to_string(&Mode::Onepass).unwrap(), "\"onepass\"");
    }
}
