use criterion::{criterion_group, criterion_main, Criterion};
use emst::harness::oracle::mst_cost;
use emst::harness::report::Mode;
use emst::harness::runner::{run_estimate, RunConfig};
use emst_bench::{input, SEED};
use std::hint::black_box;

fn oracle(c: &mut Criterion) {
    let inp = input("uniform:n=500,d=2,lambda=1024");
    c.bench_function("oracle n=500", |b| b.iter(|| black_box(mst_cost(&inp.points).unwrap())));
}

fn modes(c: &mut Criterion) {
    let inp = input("clustered:n=40,d=2,lambda=64");
    let mut g = c.benchmark_group("estimate n=40");
    g.sample_size(10);
    for (name, mode, eps) in [("exact-z", Mode::ExactZ, 0.5), ("alpha", Mode::Alpha, 0.5), ("onepass", Mode::Onepass, 0.25)] {
        let mut cfg = RunConfig::new(mode, eps, SEED);
        cfg.samples = Some(4);
        cfg.size_threshold = Some(16.0);
        g.bench_function(name, |b| b.iter(|| black_box(run_estimate(&inp, &cfg).unwrap().estimate)));
    }
    g.finish();
}

criterion_group!(benches, oracle, modes);
criterion_main!(benches);
