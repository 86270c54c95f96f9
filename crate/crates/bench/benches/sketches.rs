use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emst::lsh::LshFunction;
use emst::recsampler::{RecSampler, RecSamplerConfig, Triple, Universe};
use emst::sketch::{KSparse, L0Sampler, PStableSketch, DEFAULT_FAIL};
use emst_bench::{real_points, sparse_vector, SEED};
use std::hint::black_box;

fn ksparse(c: &mut Criterion) {
    let mut g = c.benchmark_group("ksparse");
    for k in [4, 32] {
        let x = sparse_vector(k);
        g.bench_with_input(BenchmarkId::new("update+decode", k), &x, |b, x| {
            b.iter(|| {
                let mut s = KSparse::new(k, DEFAULT_FAIL, SEED);
                for &(i, v) in x {
                    s.update(i, v);
                }
                black_box(s.decode())
            })
        });
    }
    g.finish();
}

fn l0(c: &mut Criterion) {
    let x = sparse_vector(64);
    c.bench_function("l0 sampler 64 updates", |b| {
        b.iter(|| {
            let mut s = L0Sampler::new(SEED);
            for &(i, v) in &x {
                s.update(i, v);
            }
            black_box(s.sample())
        })
    });
}

fn pstable(c: &mut Criterion) {
    let mut g = c.benchmark_group("pstable update");
    for p in [1.0, 0.5] {
        let mut s = PStableSketch::new(p, 1000, SEED).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, _| b.iter(|| s.update(black_box(17), 3)));
    }
    g.finish();
}

fn lsh(c: &mut Criterion) {
    let mut g = c.benchmark_group("lsh hash_and_test");
    for d in [2, 4] {
        let h = LshFunction::new(2.0, 0.25, SEED).unwrap();
        let pts = real_points(256, d);
        g.bench_with_input(BenchmarkId::from_parameter(d), &pts, |b, pts| {
            b.iter(|| pts.iter().map(|x| h.hash_and_test(x).unwrap().1 as usize).sum::<usize>())
        });
    }
    g.finish();
}

fn recsampler(c: &mut Criterion) {
    let cfg = RecSamplerConfig::new(1.0, 2).with_copies(1);
    let universe = Universe::Dense { n1: 4, n2: 4, n3: 4 };
    c.bench_function("recsampler 64 updates + batch", |b| {
        b.iter(|| {
            let mut s = RecSampler::new(cfg.clone(), universe, SEED).unwrap();
            for i in 0..64u64 {
                s.update(Triple::new((i / 16) as u32, (i / 4 % 4) as u32, i % 4), 1 + (i % 3) as i64).unwrap();
            }
            black_box(s.sample_batch().is_ok())
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = ksparse, l0, pstable, lsh, recsampler
}
criterion_main!(benches);
