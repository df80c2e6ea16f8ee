//! Independent reference computations used only by the acceptance suite.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Composite rule: `panels` equal panels of an `order`-point rule on [a, b].
pub fn composite_nodes(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * h;
        for j in 0..order {
            out.push((c + 0.5 * h * x[j], 0.5 * h * w[j]));
        }
    }
    out
}

pub fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - 0.5 * x * x / var
}

/// Univariate log prior densities written out from their definitions.
pub fn ln_prior(family: &str, theta: f64, phi: f64, tau: f64) -> f64 {
    let tp = tau * phi;
    let t2 = theta * theta;
    match family {
        "pmom" => (t2 / tp).ln() + ln_normal(theta, tp),
        "pimom" => 0.5 * tp.ln() - 0.5 * PI.ln() - t2.ln() - tp / t2,
        "pemom" => SQRT_2 - tp / t2 + ln_normal(theta, tp),
        _ => unreachable!(),
    }
}

pub struct Moments {
    pub mean_theta: f64,
    pub var_theta: f64,
    pub mean_phi: f64,
    pub var_phi: f64,
}

/// Posterior moments of (θ, φ) for y = xθ + e, e ~ N(0, φ), by a 2-d
/// tensor Gauss–Legendre rule over θ (split at 0) and ln φ.
pub fn posterior_moments_1d(
    family: &str,
    tau: f64,
    a_phi: f64,
    b_phi: f64,
    x: &[f64],
    y: &[f64],
) -> Moments {
    let n = x.len() as f64;
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let ols = sxy / sxx;
    let s2 = (syy - ols * sxy) / n;
    let half = ols.abs() + 12.0 * (s2 / sxx).sqrt() + 1.0;
    let mut thetas = composite_nodes(-half, 0.0, 300, 16);
    thetas.extend(composite_nodes(0.0, half, 300, 16));
    let us = composite_nodes(s2.ln() - 2.5, s2.ln() + 2.5, 200, 16);
    let mut logs = Vec::with_capacity(thetas.len() * us.len());
    let mut max = f64::NEG_INFINITY;
    for &(t, _) in &thetas {
        let rss = syy - 2.0 * t * sxy + t * t * sxx;
        for &(u, _) in &us {
            let phi = u.exp();
            let l = -0.5 * n * phi.ln() - 0.5 * rss / phi
                + ln_prior(family, t, phi, tau)
                - (0.5 * a_phi + 1.0) * phi.ln()
                - 0.5 * b_phi / phi
                + u;
            max = max.max(l);
            logs.push(l);
        }
    }
    let mut z = 0.0;
    let (mut m1, mut m2, mut f1, mut f2) = (0.0, 0.0, 0.0, 0.0);
    let mut idx = 0;
    for &(t, wt) in &thetas {
        for &(u, wu) in &us {
            let w = wt * wu * (logs[idx] - max).exp();
            idx += 1;
            let phi = u.exp();
            z += w;
            m1 += w * t;
            m2 += w * t * t;
            f1 += w * phi;
            f2 += w * phi * phi;
        }
    }
    let (m1, m2, f1, f2) = (m1 / z, m2 / z, f1 / z, f2 / z);
    Moments {
        mean_theta: m1,
        var_theta: m2 - m1 * m1,
        mean_phi: f1,
        var_phi: f2 - f1 * f1,
    }
}

/// Rows i.i.d. N(0, [[2, 1], [1, 2]]), y = Xθ + N(0, 1).
pub fn two_predictor_design(n: usize, theta: [f64; 2], seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // Cholesky of [[2, 1], [1, 2]]
    let (l11, l21, l22) = (2f64.sqrt(), 1.0 / 2f64.sqrt(), 1.5f64.sqrt());
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        x[(i, 0)] = l11 * z1;
        x[(i, 1)] = l21 * z1 + l22 * z2;
        let e: f64 = StandardNormal.sample(&mut rng);
        y[i] = theta[0] * x[(i, 0)] + theta[1] * x[(i, 1)] + e;
    }
    (x, y)
}

/// OLS t-statistic of coefficient `j`.
pub fn ols_z(data: &nlpbma::Dataset, j: usize) -> f64 {
    let x = data.x();
    let g_inv = x.tr_mul(x).try_inverse().expect("full rank design");
    let b = &g_inv * x.tr_mul(data.y());
    let r = data.y() - x * &b;
    let s2 = r.dot(&r) / (data.n() - data.p()) as f64;
    b[j] / (s2 * g_inv[(j, j)]).sqrt()
}
