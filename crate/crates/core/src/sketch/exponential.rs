//! Exponential variables by inverse CDF.

use crate::rng::Counter;

/// Exp(rate) from a uniform in (0,1).
#[inline]
pub fn exp_from_uniform(u: f64, rate: f64) -> f64 {
    -u.ln() / rate
}

#[derive(Clone, Copy, Debug)]
pub struct ExpDraw {
    pub rate: f64,
    pub value: f64,
}

impl ExpDraw {
    pub fn new(seed: u64, parts: &[u64], rate: f64) -> Self {
        let u = Counter::new(seed, parts).uniform(0);
        ExpDraw { rate, value: exp_from_uniform(u, rate) }
    }
}

/// Frequencies with which each coordinate attains the largest 1/t_j for
/// independent t_j ∼ Exp(λ_j); these converge to λ_i/Σλ_j.
pub fn exp_argmax_distribution_check(lambdas: &[f64], trials: usize, seed: u64) -> Vec<f64> {
    let mut counts = vec![0usize; lambdas.len()];
    for trial in 0..trials as u64 {
        let c = Counter::new(seed, &[0x4558, trial]);
        let mut best = 0;
        let mut best_t = f64::INFINITY;
        for (j, &l) in lambdas.iter().enumerate() {
            let t = exp_from_uniform(c.uniform(j as u64), l);
            if t < best_t {
                best_t = t;
                best = j;
            }
        }
        counts[best] += 1;
    }
    counts.into_iter().map(|c| c as f64 / trials as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair() {
        let f = exp_argmax_distribution_check(&[1.0, 1.0], 20_000, 3);
        let sigma = (0.25f64 / 20_000.0).sqrt();
        assert!((f[0] - 0.5).abs() < 3.0 * sigma, "{f:?}");
    }

    #[test]
    fn draws_positive() {
        for i in 0..1000 {
            assert!(ExpDraw::new(1, &[i], 2.0).value > 0.0);
        }
    }
}
