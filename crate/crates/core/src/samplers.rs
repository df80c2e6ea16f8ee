//! Model-conditional posterior samplers for (θ, φ).
//!
//! Each iteration updates φ given θ, draws one latent truncation level
//! λᵢ ~ Unif(0, d(θᵢ, φ)) per coordinate, then redraws θ from
//! N(m, φS⁻¹) restricted to `d(θᵢ, φ) > λᵢ`, which is always an exclusion
//! `|θᵢ| ≤ tᵢ`. The truncated draw is one sweep of the outer-rectangle
//! Gibbs kernel in [`crate::tmvn`].
//!
//! | family | φ update                                         | S            | tᵢ²                        |
//! |--------|--------------------------------------------------|--------------|----------------------------|
//! | pMOM   | IG((a+n+3k)/2, (b+s_R²+θ'θ/τ)/2)                  | X'X + I/τ    | U·θᵢ²                      |
//! | piMOM  | MH, proposal IG((a+n−k)/2, (b+s_R²)/2)            | X'X + I/τ_N  | g⁻¹(g(θᵢ²) + ln U)         |
//! | peMOM  | MH, proposal IG((a+n+k)/2, (b+s_R²+θ'θ/τ)/2)      | X'X + I/τ    | τφ/(τφ/θᵢ² − ln U)         |
//!
//! Both MH steps accept with probability `min{1, exp((φ_old − φ*)τ Σ θᵢ⁻²)}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::conjugate::ConjugateFit;
use crate::data::{Dataset, ModelIndicator};
use crate::error::{Error, Result};
use crate::penalty_inverse::ImomPenaltyCurve;
use crate::priors::{Family, PriorSpec};
use crate::rng::{inv_gamma, open_unit, rng_from_seed};
use crate::tmvn::OuterGibbsKernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainConfig {
    /// Total iterations including burn-in.
    pub n_iter: usize,
    pub burn: usize,
    pub seed: u64,
    pub keep_lambda: bool,
}

impl ChainConfig {
    /// `n_iter` iterations with the first 10% discarded.
    pub fn new(n_iter: usize, seed: u64) -> Self {
        Self {
            n_iter,
            burn: n_iter / 10,
            seed,
            keep_lambda: false,
        }
    }

    pub fn with_burn(mut self, burn: usize) -> Self {
        self.burn = burn;
        self
    }

    pub fn keep_lambda(mut self, keep: bool) -> Self {
        self.keep_lambda = keep;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.burn >= self.n_iter {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be smaller than the {} iterations",
                self.burn, self.n_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub model: ModelIndicator,
    /// Kept draws × |model|, columns in increasing variable order.
    pub theta: DMatrix<f64>,
    pub phi: Vec<f64>,
    /// λ draws on the penalty scale, when requested.
    pub lambda: Option<DMatrix<f64>>,
    pub burn_in: usize,
    pub seed: u64,
    /// Acceptance rate of the φ step (1 for exact Gibbs updates).
    pub mh_acceptance: f64,
    /// Coordinates resolved by the TMVN boundary fallback.
    pub tmvn_fallbacks: usize,
}

impl ChainOutput {
    pub fn n_draws(&self) -> usize {
        self.phi.len()
    }

    pub fn theta_column(&self, j: usize) -> Vec<f64> {
        self.theta.column(j).iter().copied().collect()
    }

    pub fn theta_mean(&self) -> DVector<f64> {
        let n = self.theta.nrows().max(1) as f64;
        DVector::from_iterator(
            self.theta.ncols(),
            self.theta.column_iter().map(|c| c.sum() / n),
        )
    }

    pub fn phi_mean(&self) -> f64 {
        self.phi.iter().sum::<f64>() / self.phi.len().max(1) as f64
    }

    /// Posterior mean expanded to all p variables, zeros outside the model.
    pub fn full_theta_mean(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.model.p());
        for (j, &i) in self.model.indices().iter().enumerate() {
            out[i] = self.theta.column(j).sum() / self.theta.nrows().max(1) as f64;
        }
        out
    }
}

/// Ridge start `(X'X + I/τ)⁻¹X'y` and its mean residual variance.
///
/// Zero coordinates are moved to `1e-3·√(φ⁰τ)` so the start lies in the
/// support of every non-local prior.
pub fn init_chain(data: &Dataset, model: &ModelIndicator, tau: f64) -> Result<(DVector<f64>, f64)> {
    let cols = model.indices();
    let fit = ConjugateFit::new(data, &cols, tau)?;
    let mut theta = fit.mean.clone();
    let scale = (data.yty() / data.n().max(1) as f64).max(1.0);
    let phi = (fit.rss(data.yty(), theta.as_slice()) / data.n().max(1) as f64).max(1e-12 * scale);
    let nudge = 1e-3 * (phi * tau).sqrt();
    for t in theta.iter_mut() {
        if *t == 0.0 {
            *t = nudge;
        }
    }
    Ok((theta, phi))
}

/// Dispatch on `spec.family`.
pub fn gibbs_sampler(
    data: &Dataset,
    model: &ModelIndicator,
    spec: &PriorSpec,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    match spec.family {
        Family::Pmom => gibbs_pmom(data, model, spec, cfg),
        Family::Pimom => gibbs_pimom(data, model, spec, cfg),
        Family::Pemom => gibbs_pemom(data, model, spec, cfg),
    }
}

/// As [`gibbs_sampler`], started from `(theta0, phi0)` instead of [`init_chain`].
/// `theta0` holds the model's coordinates in increasing variable order.
pub fn gibbs_sampler_from(
    data: &Dataset,
    model: &ModelIndicator,
    spec: &PriorSpec,
    cfg: &ChainConfig,
    theta0: &[f64],
    phi0: f64,
) -> Result<ChainOutput> {
    check_family(data, model, spec, spec.family)?;
    if theta0.len() != model.size() {
        return Err(Error::DimensionMismatch {
            expected: model.size(),
            got: theta0.len(),
        });
    }
    if theta0.iter().any(|t| *t == 0.0 || !t.is_finite()) || phi0 <= 0.0 || !phi0.is_finite() {
        return Err(Error::InvalidArgument(
            "start needs finite nonzero coordinates and a positive finite phi".into(),
        ));
    }
    run_chain(data, model, spec, cfg, Some((theta0, phi0)))
}

pub fn gibbs_pmom(
    data: &Dataset,
    model: &ModelIndicator,
    spec: &PriorSpec,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    check_family(data, model, spec, Family::Pmom)?;
    run_chain(data, model, spec, cfg, None)
}

pub fn gibbs_pimom(
    data: &Dataset,
    model: &ModelIndicator,
    spec: &PriorSpec,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    check_family(data, model, spec, Family::Pimom)?;
    run_chain(data, model, spec, cfg, None)
}

pub fn gibbs_pemom(
    data: &Dataset,
    model: &ModelIndicator,
    spec: &PriorSpec,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    check_family(data, model, spec, Family::Pemom)?;
    run_chain(data, model, spec, cfg, None)
}

fn check_family(data: &Dataset, model: &ModelIndicator, spec: &PriorSpec, family: Family) -> Result<()> {
    spec.validate()?;
    if spec.family != family {
        return Err(Error::InvalidArgument(format!(
            "{family} sampler called with a {} prior",
            spec.family
        )));
    }
    match family {
        Family::Pmom if spec.r != 1 => Err(Error::InvalidArgument(format!(
            "the pMOM sampler supports r = 1 only, got r = {}",
            spec.r
        ))),
        Family::Pimom if model.size() >= data.n() => Err(Error::InvalidArgument(format!(
            "piMOM sampler needs |model| < n, got {} >= {}",
            model.size(),
            data.n()
        ))),
        _ => Ok(()),
    }
}

/// MH acceptance probability for the φ step.
pub fn phi_acceptance(phi_old: f64, phi_new: f64, tau: f64, sum_inv_sq: f64) -> f64 {
    ((phi_old - phi_new) * tau * sum_inv_sq).exp().min(1.0)
}

fn run_chain(
    data: &Dataset,
    model: &ModelIndicator,
    spec: &PriorSpec,
    cfg: &ChainConfig,
    start: Option<(&[f64], f64)>,
) -> Result<ChainOutput> {
    cfg.validate()?;
    if model.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: model.p(),
        });
    }
    let cols = model.indices();
    let k = cols.len();
    let n = data.n() as f64;
    let yty = data.yty();
    let (a, b, tau) = (spec.a_phi, spec.b_phi, spec.tau);
    let kept = cfg.n_iter - cfg.burn;
    let mut rng = rng_from_seed(cfg.seed);
    let mut theta_out = DMatrix::zeros(kept, k);
    let mut phi_out = Vec::with_capacity(kept);
    let mut lambda_out = cfg.keep_lambda.then(|| DMatrix::zeros(kept, k));

    if k == 0 {
        for _ in 0..kept {
            phi_out.push(inv_gamma(&mut rng, 0.5 * (a + n), 0.5 * (b + yty)));
        }
        return Ok(ChainOutput {
            model: model.clone(),
            theta: theta_out,
            phi: phi_out,
            lambda: lambda_out,
            burn_in: cfg.burn,
            seed: cfg.seed,
            mh_acceptance: 1.0,
            tmvn_fallbacks: 0,
        });
    }

    let kappa = spec.kernel_dispersion();
    let fit = ConjugateFit::new(data, &cols, kappa)?;
    let mut kernel = OuterGibbsKernel::new(&fit.mean, fit.cov_factor()?);
    let (mut theta, mut phi) = match start {
        Some((t, p)) => (t.to_vec(), p),
        None => {
            let (t, p) = init_chain(data, model, tau)?;
            (t.iter().copied().collect(), p)
        }
    };
    let mut lower = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut lambda = vec![0.0; k];
    let mut accepted = 0usize;
    let mut fallbacks = 0usize;
    let kf = k as f64;

    for it in 0..cfg.n_iter {
        let s_r = fit.rss(yty, &theta);
        let tt: f64 = theta.iter().map(|t| t * t).sum();
        let inv_sq: f64 = theta.iter().map(|t| 1.0 / (t * t)).sum();
        match spec.family {
            Family::Pmom => {
                phi = inv_gamma(&mut rng, 0.5 * (a + n + 3.0 * kf), 0.5 * (b + s_r + tt / tau));
                accepted += 1;
            }
            Family::Pimom => {
                let prop = inv_gamma(&mut rng, 0.5 * (a + n - kf), 0.5 * (b + s_r));
                if accept(&mut rng, phi_acceptance(phi, prop, tau, inv_sq)) {
                    phi = prop;
                    accepted += 1;
                }
            }
            Family::Pemom => {
                let prop = inv_gamma(&mut rng, 0.5 * (a + n + kf), 0.5 * (b + s_r + tt / tau));
                if accept(&mut rng, phi_acceptance(phi, prop, tau, inv_sq)) {
                    phi = prop;
                    accepted += 1;
                }
            }
        }

        let tp = tau * phi;
        let curve = match spec.family {
            Family::Pimom => Some(ImomPenaltyCurve::new(tau, spec.tau_n, phi)?),
            _ => None,
        };
        for i in 0..k {
            let t2 = theta[i] * theta[i];
            let ln_u = open_unit(&mut rng).ln();
            let (half_sq, ln_lambda) = match spec.family {
                Family::Pmom => (t2 * ln_u.exp(), (t2 / tp).ln() + ln_u),
                Family::Pimom => {
                    let c = curve.as_ref().expect("curve built for piMOM");
                    let level = c.g_of_z(t2) + ln_u;
                    (c.invert_g(level)?, level)
                }
                Family::Pemom => (
                    tp / (tp / t2 - ln_u),
                    std::f64::consts::SQRT_2 - tp / t2 + ln_u,
                ),
            };
            let half = half_sq.sqrt();
            lower[i] = -half;
            upper[i] = half;
            lambda[i] = ln_lambda.exp();
        }

        fallbacks += kernel.sweep(phi.sqrt(), &mut theta, &lower, &upper, &mut rng);

        if it >= cfg.burn {
            let row = it - cfg.burn;
            for j in 0..k {
                theta_out[(row, j)] = theta[j];
            }
            phi_out.push(phi);
            if let Some(l) = lambda_out.as_mut() {
                for j in 0..k {
                    l[(row, j)] = lambda[j];
                }
            }
        }
    }

    Ok(ChainOutput {
        model: model.clone(),
        theta: theta_out,
        phi: phi_out,
        lambda: lambda_out,
        burn_in: cfg.burn,
        seed: cfg.seed,
        mh_acceptance: accepted as f64 / cfg.n_iter as f64,
        tmvn_fallbacks: fallbacks,
    })
}

fn accept<R: Rng + ?Sized>(rng: &mut R, prob: f64) -> bool {
    prob >= 1.0 || rng.random::<f64>() < prob
}
