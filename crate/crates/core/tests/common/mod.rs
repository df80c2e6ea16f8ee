//! Reference computations shared by the integration tests.
#![allow(dead_code)]

#[path = "../acceptance/oracle.rs"]
pub mod oracle;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use nlpbma::Dataset;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor n − 1.
pub fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standard error of the mean of i.i.d. values.
pub fn se(x: &[f64]) -> f64 {
    (var(x) / x.len() as f64).sqrt()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Kolmogorov–Smirnov distance between a sample and a continuous cdf.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value for distance `d` at sample size `n`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let x = d * (n as f64).sqrt();
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k * k) as f64 * x * x).exp();
        p += if k % 2 == 1 { term } else { -term };
    }
    p.clamp(0.0, 1.0)
}

/// `∫ f` over [a, b] with a composite 16-point Gauss–Legendre rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    oracle::composite_nodes(a, b, panels, 16)
        .into_iter()
        .map(|(x, w)| w * f(x))
        .sum()
}

/// Root of a nondecreasing function on [lo, hi] by plain bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Least-squares fit: coefficients and their standard errors.
pub fn ols(data: &Dataset) -> (DVector<f64>, Vec<f64>) {
    let x = data.x();
    let g_inv = x.tr_mul(x).try_inverse().expect("full rank");
    let b = &g_inv * x.tr_mul(data.y());
    let r = data.y() - x * &b;
    let s2 = r.dot(&r) / (data.n() - data.p()) as f64;
    let se = (0..data.p()).map(|j| (s2 * g_inv[(j, j)]).sqrt()).collect();
    (b, se)
}

/// Conjugate posterior mean `(X_k'X_k + I/κ)⁻¹ X_k'y` expanded to p entries.
pub fn conjugate_mean(data: &Dataset, cols: &[usize], kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; data.p()];
    if cols.is_empty() {
        return out;
    }
    let xk = DMatrix::from_fn(data.n(), cols.len(), |i, j| data.x()[(i, cols[j])]);
    let mut s = xk.tr_mul(&xk);
    for i in 0..cols.len() {
        s[(i, i)] += 1.0 / kappa;
    }
    let m = s.try_inverse().unwrap() * xk.tr_mul(data.y());
    for (j, &c) in cols.iter().enumerate() {
        out[c] = m[j];
    }
    out
}

pub fn scenario(theta: [f64; 2], seed: u64) -> Dataset {
    let (x, y) = oracle::two_predictor_design(1000, theta, seed);
    Dataset::new(y, x).unwrap()
}
