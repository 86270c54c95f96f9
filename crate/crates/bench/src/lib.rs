//! Shared fixtures for the benchmarks.

use emst::harness::generators::InstanceSpec;
use emst::harness::runner::Input;
use emst::rng::seq_rng;
use rand::Rng;

pub const SEED: u64 = 0xBE4C;

pub fn input(spec: &str) -> Input {
    Input::from_spec(&InstanceSpec::parse(spec, SEED).expect("spec")).expect("instance")
}

/// `n` distinct random indices with small nonzero values.
pub fn sparse_vector(n: usize) -> Vec<(u128, i64)> {
    let mut rng = seq_rng(SEED, n as u64);
    (0..n).map(|_| (rng.gen::<u128>(), rng.gen_range(1..=50) * if rng.gen() { 1 } else { -1 })).collect()
}

/// Points in [0, 100)^d for hashing.
pub fn real_points(n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = seq_rng(SEED, 1 << 32 | d as u64);
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.0..100.0)).collect()).collect()
}
