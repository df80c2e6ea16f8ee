//! Integrated likelihoods `m_k(y) = m_k^L(y) · g_k(y)`.
//!
//! `m_k^L` is the closed-form Normal–IG marginal under the local kernel of
//! the family, and `g_k = E[d(θ, φ) | y]` is the posterior mean of the
//! penalty under that local posterior. `g_k` is exact for pMOM (r = 1) with
//! at most two coefficients and estimated by Monte Carlo otherwise, drawing
//! (φ, θ) exactly from the Normal–IG posterior.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::conjugate::ConjugateFit;
use crate::data::{Dataset, ModelIndicator};
use crate::error::{ensure_positive, Error, Result};
use crate::normal::LN_SQRT_2PI;
use crate::priors::{log_penalty, Family, PriorSpec};
use crate::rng::{inv_gamma, rng_from_seed};

pub const MIN_SAMPLES: usize = 1_000;
pub const MIN_ESS: f64 = 50.0;
pub const MAX_WEIGHT_SHARE: f64 = 0.5;

/// Log marginal likelihood with its Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogMarginal {
    pub value: f64,
    pub mc_se: f64,
    pub n_samples: usize,
    pub ess: Option<f64>,
    pub warnings: Vec<String>,
}

impl LogMarginal {
    fn exact(value: f64) -> Self {
        Self {
            value,
            mc_se: 0.0,
            n_samples: 0,
            ess: None,
            warnings: Vec::new(),
        }
    }
}

/// log m^L under θ ~ N(0, τφI), φ ~ IG(a/2, b/2).
pub fn log_marginal_normal_ig(
    data: &Dataset,
    model: &ModelIndicator,
    tau: f64,
    a_phi: f64,
    b_phi: f64,
) -> Result<LogMarginal> {
    ensure_positive("tau", tau)?;
    ensure_positive("a_phi", a_phi)?;
    ensure_positive("b_phi", b_phi)?;
    check_dims(data, model)?;
    let cols = model.indices();
    let n = data.n() as f64;
    let (logdet, resid) = if cols.is_empty() {
        (0.0, data.yty())
    } else {
        let fit = ConjugateFit::new(data, &cols, tau)?;
        (fit.logdet_s + cols.len() as f64 * tau.ln(), fit.resid)
    };
    let value = -n * LN_SQRT_2PI - 0.5 * logdet + 0.5 * a_phi * (0.5 * b_phi).ln()
        + ln_gamma(0.5 * (a_phi + n))
        - ln_gamma(0.5 * a_phi)
        - 0.5 * (a_phi + n) * (0.5 * (b_phi + resid)).ln();
    Ok(LogMarginal::exact(value))
}

fn check_dims(data: &Dataset, model: &ModelIndicator) -> Result<()> {
    if model.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: model.p(),
        });
    }
    Ok(())
}

/// log g_k, the log posterior mean of the penalty under the local posterior.
///
/// `n_samples` applies to the Monte Carlo path only.
pub fn g_factor(
    data: &Dataset,
    model: &ModelIndicator,
    spec: &PriorSpec,
    n_samples: usize,
    seed: u64,
) -> Result<LogMarginal> {
    spec.validate()?;
    check_dims(data, model)?;
    let cols = model.indices();
    if cols.is_empty() {
        return Ok(LogMarginal::exact(0.0));
    }
    let fit = ConjugateFit::new(data, &cols, spec.kernel_dispersion())?;
    let alpha = 0.5 * (spec.a_phi + data.n() as f64);
    let beta = 0.5 * (spec.b_phi + fit.resid);
    if spec.family == Family::Pmom && spec.r == 1 && cols.len() <= 2 {
        return Ok(LogMarginal::exact(pmom_exact_log_g(&fit, spec.tau, alpha, beta)));
    }
    g_factor_mc(&fit, spec, alpha, beta, n_samples, seed)
}

/// E[∏ θᵢ²/(τφ)] for |k| ≤ 2 from Normal moments and E φ⁻¹, E φ⁻².
fn pmom_exact_log_g(fit: &ConjugateFit, tau: f64, alpha: f64, beta: f64) -> f64 {
    let v = fit.cov_unit();
    let m = &fit.mean;
    let e_inv = alpha / beta;
    let e_inv2 = alpha * (alpha + 1.0) / (beta * beta);
    match m.len() {
        1 => ((m[0] * m[0] * e_inv + v[(0, 0)]) / tau).ln(),
        2 => {
            let (m1, m2) = (m[0], m[1]);
            let (v11, v22, v12) = (v[(0, 0)], v[(1, 1)], v[(0, 1)]);
            let val = m1 * m1 * m2 * m2 * e_inv2
                + (m1 * m1 * v22 + m2 * m2 * v11 + 4.0 * m1 * m2 * v12) * e_inv
                + v11 * v22
                + 2.0 * v12 * v12;
            val.ln() - 2.0 * tau.ln()
        }
        _ => unreachable!("exact path covers one or two coefficients"),
    }
}

fn g_factor_mc(
    fit: &ConjugateFit,
    spec: &PriorSpec,
    alpha: f64,
    beta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<LogMarginal> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "g-factor needs at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let k = fit.mean.len();
    let l = fit.cov_factor()?;
    let mut rng = rng_from_seed(seed);
    let mut logw = Vec::with_capacity(n_samples);
    let mut z = DVector::zeros(k);
    for _ in 0..n_samples {
        let phi = inv_gamma(&mut rng, alpha, beta);
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let theta = &fit.mean + (&l * &z) * phi.sqrt();
        logw.push(theta.iter().map(|&t| log_penalty(spec, t, phi)).sum::<f64>());
    }
    Ok(summarize_log_weights(&logw))
}

/// log-mean-exp of `logw` with batch-means SE of the log estimate,
/// Kish ESS and degeneracy warnings.
pub(crate) fn summarize_log_weights(logw: &[f64]) -> LogMarginal {
    let n = logw.len();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut warnings = Vec::new();
    if !max.is_finite() {
        warnings.push("all importance weights are zero".into());
        return LogMarginal {
            value: f64::NEG_INFINITY,
            mc_se: f64::INFINITY,
            n_samples: n,
            ess: Some(0.0),
            warnings,
        };
    }
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|v| v * v).sum();
    let mean = sum / n as f64;
    let ess = sum * sum / sum_sq;
    let se_mean = crate::diagnostics::batch_means_se(&w);
    let mc_se = if mean > 0.0 { se_mean / mean } else { f64::INFINITY };
    if ess < MIN_ESS {
        warnings.push(format!("effective sample size {ess:.1} below {MIN_ESS}"));
    }
    let share = w.iter().copied().fold(0.0, f64::max) / sum;
    if share > MAX_WEIGHT_SHARE {
        warnings.push(format!("largest weight carries {:.2} of the total", share));
    }
    LogMarginal {
        value: max + mean.ln(),
        mc_se,
        n_samples: n,
        ess: Some(ess),
        warnings,
    }
}

/// log m_k = log m_k^L + log g_k for the non-local prior `spec`.
pub fn log_marginal_nlp(
    data: &Dataset,
    model: &ModelIndicator,
    spec: &PriorSpec,
    n_samples: usize,
    seed: u64,
) -> Result<LogMarginal> {
    spec.validate()?;
    let local = log_marginal_normal_ig(data, model, spec.kernel_dispersion(), spec.a_phi, spec.b_phi)?;
    let g = g_factor(data, model, spec, n_samples, seed)?;
    Ok(LogMarginal {
        value: local.value + g.value,
        mc_se: g.mc_se,
        n_samples: g.n_samples,
        ess: g.ess,
        warnings: g.warnings,
    })
}
