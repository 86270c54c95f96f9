//! p-stable variables and the median-based norm sketch.

use super::exact::{median, ExactSum, FixedTerm, Q_BITS};
use crate::error::{config, Error, Result};
use crate::rng::{fold128, Counter};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Mutex, OnceLock};

pub fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 2.0) {
        return config(format!("p = {p} is outside (0, 2]"));
    }
    Ok(())
}

/// Chambers–Mallows–Stuck draw from uniforms u1 (angle) and u2 (for the
/// exponential), both in (0,1).
pub fn gen_p_stable(u1: f64, u2: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    let theta = PI * (u1 - 0.5);
    if p == 1.0 {
        return Ok(theta.tan());
    }
    let e = -u2.ln();
    Ok((p * theta).sin() / theta.cos().powf(1.0 / p) * ((1.0 - p) * theta).cos().powf((1.0 - p) / p)
        / e.powf((1.0 - p) / p))
}

/// The same draw as (negative, log2|X|), finite for every p in (0,2].
pub fn log2_p_stable(u1: f64, u2: f64, p: f64) -> (bool, f64) {
    let theta = PI * (u1 - 0.5);
    let neg = theta < 0.0;
    let a = theta.abs();
    if p == 1.0 {
        return (neg, a.tan().log2());
    }
    let (sa, ca) = a.sin_cos();
    let (sp, cp) = (p * a).sin_cos();
    // cos((1-p)a) by the difference formula; all four factors are
    // nonnegative for p < 1 so nothing cancels.
    let c1p = if p < 1.0 { ca * cp + sa * sp } else { ((1.0 - p) * a).cos() };
    let e = -u2.ln();
    let l = sp.ln() - ca.ln() / p + (1.0 - p) / p * (c1p / e).ln();
    (neg, l * std::f64::consts::LOG2_E)
}

/// P(|X| ≤ e^m) for X standard p-stable.
fn abs_cdf_log(p: f64, m: f64) -> f64 {
    if p == 1.0 {
        return m.exp().atan() / FRAC_PI_2;
    }
    let g = |theta: f64| -> f64 {
        // |X| ≤ e^m ⇔ E ≥ c(θ) for p < 1 and E ≤ c(θ) for p > 1.
        let lc = ((1.0 - p) * theta).cos().ln()
            + p / (1.0 - p) * ((p * theta).sin().ln() - m - theta.cos().ln() / p);
        let c = lc.exp();
        if p < 1.0 {
            (-c).exp()
        } else {
            -(-c).exp_m1()
        }
    };
    adaptive_simpson(&g, 0.0, FRAC_PI_2, 1e-11, 40) / FRAC_PI_2
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn eval(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = eval(f, lm);
        let frm = eval(f, rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // Split the range so that sharp transitions are not missed by the
    // first coarse estimate.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            let (fa, fm, fb) = (eval(f, lo), eval(f, 0.5 * (lo + hi)), eval(f, hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            rec(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, depth)
        })
        .sum()
}

/// Natural log of median|X|, by quadrature of the distribution function.
pub fn ln_median_abs(p: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&v) = cache.lock().unwrap().get(&p.to_bits()) {
        return v;
    }
    let v = if p == 1.0 { 0.0 } else { solve_quantile(p, 0.5) };
    cache.lock().unwrap().insert(p.to_bits(), v);
    v
}

fn solve_quantile(p: f64, q: f64) -> f64 {
    let span = 60.0 / p + 60.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if abs_cdf_log(p, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn median_abs(p: f64) -> f64 {
    ln_median_abs(p).exp()
}

/// Density of ln|X| at its median.
pub fn ln_abs_density_at_median(p: f64) -> f64 {
    let m = ln_median_abs(p);
    let h = 1e-3 * (1.0 + 1.0 / p);
    (abs_cdf_log(p, m + h) - abs_cdf_log(p, m - h)) / (2.0 * h)
}

/// Monte Carlo estimate of median|X| from `draws` counter-mode samples.
pub fn median_abs_monte_carlo(p: f64, draws: usize, seed: u64) -> f64 {
    let c = Counter::new(seed, &[0x4D43]);
    let mut v: Vec<f64> = (0..draws as u64).map(|i| log2_p_stable(c.uniform(2 * i), c.uniform(2 * i + 1), p).1).collect();
    median(&mut v).exp2()
}

/// Repetitions for relative error ε₀ with failure probability `fail`, from
/// the normal approximation to the sample median of ln|X|, with 30% slack.
pub fn reps_for(p: f64, eps0: f64, fail: f64) -> usize {
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - fail / 2.0);
    let g = ln_abs_density_at_median(p);
    let r = z / (2.0 * g * (1.0 + eps0).ln());
    (1.3 * r * r).ceil() as usize
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PStableSketch {
    pub p_bits: u64,
    pub reps: usize,
    pub seed: u64,
    pub(crate) acc: Vec<ExactSum>,
}

impl PStableSketch {
    pub fn new(p: f64, reps: usize, seed: u64) -> Result<Self> {
        check_p(p)?;
        if reps == 0 {
            return config("need at least one repetition");
        }
        Ok(PStableSketch { p_bits: p.to_bits(), reps, seed, acc: vec![ExactSum::zero(); reps] })
    }

    pub fn p(&self) -> f64 {
        f64::from_bits(self.p_bits)
    }

    fn counter(&self, index: u128) -> Counter {
        Counter::new(self.seed, &[0x5053, fold128(index)])
    }

    pub fn coefficient(&self, index: u128, r: usize) -> (bool, f64) {
        let c = self.counter(index);
        log2_p_stable(c.uniform(2 * r as u64), c.uniform(2 * r as u64 + 1), self.p())
    }

    pub fn update(&mut self, index: u128, delta: i64) {
        let (c, p) = (self.counter(index), self.p());
        for (r, acc) in self.acc.iter_mut().enumerate() {
            let (neg, l) = log2_p_stable(c.uniform(2 * r as u64), c.uniform(2 * r as u64 + 1), p);
            acc.add_term(FixedTerm::from_log2(neg, l, Q_BITS), delta);
        }
    }

    pub fn merge(&mut self, o: &PStableSketch) -> Result<()> {
        if self.seed != o.seed || self.reps != o.reps || self.p_bits != o.p_bits {
            return Err(Error::SketchMismatch("p-stable sketches differ".into()));
        }
        for (a, b) in self.acc.iter_mut().zip(&o.acc) {
            a.add(b);
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.acc.iter().all(|a| a.is_zero())
    }

    /// log2 of the ‖x‖_p estimate; -inf for the zero vector.
    pub fn log2_estimate(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let mut logs: Vec<f64> = self.acc.iter().map(|a| a.log2_abs()).collect();
        median(&mut logs) - Q_BITS as f64 - ln_median_abs(self.p()) / std::f64::consts::LN_2
    }

    pub fn estimate(&self) -> f64 {
        self.log2_estimate().exp2()
    }
}

pub fn lp_norm(x: &[(u128, i64)], p: f64) -> f64 {
    x.iter().map(|&(_, v)| (v.unsigned_abs() as f64).powf(p)).sum::<f64>().powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_p() {
        assert!(gen_p_stable(0.3, 0.5, 0.0).is_err());
        assert!(gen_p_stable(0.3, 0.5, 2.5).is_err());
        assert!(PStableSketch::new(3.0, 4, 1).is_err());
    }

    #[test]
    fn log_form_matches_direct() {
        for &p in &[0.3, 0.5, 1.0, 1.5, 2.0] {
            for k in 1..20 {
                let u1 = k as f64 / 21.0;
                let u2 = (k as f64 * 0.37).fract().max(0.01);
                let x = gen_p_stable(u1, u2, p).unwrap();
                let (neg, l) = log2_p_stable(u1, u2, p);
                assert_eq!(neg, x < 0.0, "p={p} u1={u1}");
                assert!((l - x.abs().log2()).abs() < 1e-9, "p={p} {l} {}", x.abs().log2());
            }
        }
    }

    #[test]
    fn known_medians() {
        assert!(ln_median_abs(1.0).abs() < 1e-12);
        // Gaussian with variance 2: median|X| = √2 · Φ^{-1}(3/4).
        let expect = 2f64.sqrt() * 0.674_489_750_196_081_7;
        assert!((median_abs(2.0) / expect - 1.0).abs() < 1e-6, "{}", median_abs(2.0));
    }

    #[test]
    fn cauchy_median_monte_carlo() {
        let m = median_abs_monte_carlo(1.0, 100_000, 4);
        assert!((m - 1.0).abs() < 0.05, "{m}");
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo() {
        for &p in &[0.25, 0.5, 1.5] {
            let q = median_abs(p);
            let mc = median_abs_monte_carlo(p, 200_000, 11);
            assert!((mc / q - 1.0).abs() < 0.03, "p={p} quad={q} mc={mc}");
        }
    }

    #[test]
    fn single_coordinate_and_zero() {
        let mut s = PStableSketch::new(1.0, reps_for(1.0, 0.1, 0.01), 5).unwrap();
        assert_eq!(s.estimate(), 0.0);
        s.update(3, -40);
        assert!((s.estimate() / 40.0 - 1.0).abs() < 0.1, "{}", s.estimate());
        s.update(3, 40);
        assert!(s.is_zero());
    }
}
