use emst::recsampler::{check_events, RecSampler, RecSamplerConfig, Triple, Universe};
use emst::rng::seq_rng;
use rand::Rng;
use std::collections::BTreeMap;

fn fixture() -> BTreeMap<Triple, i64> {
    let mut x = BTreeMap::new();
    for i1 in 0..3u32 {
        for i2 in 0..3u32 {
            for i3 in 0..3u64 {
                let v = ((i1 as i64 * 7 + i2 as i64 * 3 + i3 as i64 * 5) % 4) as i64;
                if v != 0 {
                    x.insert(Triple::new(i1, i2, i3), v);
                }
            }
        }
    }
    x
}

/// Exact hierarchical law: P(i₁)·P(i₂|i₁)·P(i₃|i₁,i₂) with ℓp^p masses.
fn exact_law(x: &BTreeMap<Triple, i64>, p: f64) -> BTreeMap<Triple, f64> {
    let w = |v: i64| (v.abs() as f64).powf(p);
    let total: f64 = x.values().map(|&v| w(v)).sum();
    let mut m1: BTreeMap<u32, f64> = BTreeMap::new();
    let mut m2: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (k, &v) in x {
        *m1.entry(k.i1).or_default() += w(v);
        *m2.entry((k.i1, k.i2)).or_default() += w(v);
    }
    x.iter()
        .map(|(k, &v)| (*k, m1[&k.i1] / total * (m2[&(k.i1, k.i2)] / m1[&k.i1]) * (w(v) / m2[&(k.i1, k.i2)])))
        .collect()
}

#[test]
fn batch_law_matches_exact_law() {
    let x = fixture();
    let law = exact_law(&x, 1.0);
    let start = std::time::Instant::now();
    let trials = 10_000u64;
    let mut counts: BTreeMap<Triple, f64> = BTreeMap::new();
    let mut ok = 0.0;
    for seed in 0..trials {
        let cfg = RecSamplerConfig::new(1.0, 1);
        let mut s = RecSampler::new(cfg, Universe::Dense { n1: 3, n2: 3, n3: 3 }, seed).unwrap();
        for (k, &v) in &x {
            s.update(*k, v).unwrap();
        }
        if let Ok(b) = s.sample_batch() {
            *counts.entry(b.trio(0, 0)).or_default() += 1.0;
            ok += 1.0;
        }
    }
    let mut tv = 0.0;
    for (k, &q) in &law {
        tv += (counts.get(k).copied().unwrap_or(0.0) / ok - q).abs();
    }
    for (k, &c) in &counts {
        if !law.contains_key(k) {
            tv += c / ok;
        }
    }
    tv /= 2.0;
    eprintln!("tv {tv} ok {ok} elapsed {:?}", start.elapsed());
    assert!(tv <= 0.1);
}

fn random_vector(seed: u64) -> BTreeMap<Triple, i64> {
    let mut r = seq_rng(seed, 9);
    let mut x = BTreeMap::new();
    for i1 in 0..4u32 {
        for i2 in 0..4u32 {
            for i3 in 0..4u64 {
                let v: i64 = r.gen_range(0..4);
                if v > 0 {
                    x.insert(Triple::new(i1, i2, i3), v);
                }
            }
        }
    }
    x
}

// When the conditioning events hold, the count-sketch towers recover the
// exact argmax triple.
#[test]
fn recovery_under_events() {
    let (mut hit, mut cond) = (0, 0);
    for seed in 0..200u64 {
        let x = random_vector(seed);
        let cfg = RecSamplerConfig::new(1.0, 1).with_gamma(0.1).with_shape(5, 256, 1024).with_copies(1);
        let mut s = RecSampler::new(cfg, Universe::Dense { n1: 4, n2: 4, n3: 4 }, seed).unwrap();
        let ev = check_events(&s, &x, 0, 0, 0, 64.0).unwrap();
        if !ev.all() {
            continue;
        }
        cond += 1;
        for (k, &v) in &x {
            s.update(*k, v).unwrap();
        }
        let e = ev.exact;
        let got = (s.recover_i1(0), s.recover_i2(0, 0, e.i1), s.recover_i3(0, 0, 0, e.i1, e.i2));
        hit += (got == (Some(e.i1), Some(e.i2), Some(e.i3))) as usize;
        if cond == 40 {
            break;
        }
    }
    assert_eq!(cond, 40);
    assert!(hit >= 38, "{hit}/{cond}");
}

#[test]
fn insert_then_delete_is_zero() {
    let x = random_vector(5);
    let mut s = RecSampler::new(RecSamplerConfig::new(0.5, 2), Universe::Dense { n1: 4, n2: 4, n3: 4 }, 5).unwrap();
    for (k, &v) in &x {
        s.update(*k, v).unwrap();
    }
    assert!(!s.is_zero());
    for (k, &v) in x.iter().rev() {
        s.update(*k, -v).unwrap();
    }
    assert!(s.is_zero());
}
