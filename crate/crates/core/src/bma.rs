//! Bayesian model averaging over visited models.
//!
//! `E(θ | y) = Σ_k E(θ | M_k, y) P(M_k | y)`, with coordinates outside a
//! model contributing zero. Two paths are offered:
//!
//! - [`BmaMode::Sampled`]: draw model indicators from the visit frequencies,
//!   then θ given each drawn model, and pool the draws.
//! - [`BmaMode::TopK`]: run one chain per model among the K most visited and
//!   mix their means with renormalized weights.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, ModelIndicator};
use crate::diagnostics::autocorrelation;
use crate::error::{Error, Result};
use crate::modelsearch::{model_seed, posterior_model_probs, ModelPosterior};
use crate::priors::PriorSpec;
use crate::rng::{derive_seed, rng_from_seed};
use crate::samplers::{gibbs_sampler, ChainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BmaMode {
    Sampled,
    TopK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BmaConfig {
    pub mode: BmaMode,
    /// Sampled path: total kept draws. Top-K path: kept draws per model.
    pub draws_per_model: usize,
    pub burn_fraction: f64,
    pub seed: u64,
    pub keep_draws: bool,
}

impl BmaConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            mode: BmaMode::Sampled,
            draws_per_model: 1000,
            burn_fraction: 0.1,
            seed,
            keep_draws: false,
        }
    }

    fn burn(&self) -> usize {
        (self.burn_fraction * self.draws_per_model as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub model: ModelIndicator,
    pub weight: f64,
    /// Posterior mean over all p variables.
    pub theta_mean: Vec<f64>,
    pub phi_mean: f64,
    pub n_draws: usize,
    pub seed: u64,
    pub mh_acceptance: f64,
    pub lag1_theta: Vec<f64>,
    pub lag1_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmaEstimate {
    pub theta_hat: Vec<f64>,
    pub phi_hat: f64,
    pub inclusion_probs: Vec<f64>,
    pub models: Vec<ModelSummary>,
    /// Visit mass of the models that entered the average.
    pub visited_mass: f64,
    pub warnings: Vec<String>,
    /// Pooled θ draws (rows) over all p variables, when requested.
    #[serde(skip)]
    pub draws: Option<DMatrix<f64>>,
}

impl BmaEstimate {
    /// `Σ_k w_k E(θ | M_k)` from the stored per-model summaries.
    pub fn recombine(&self) -> Vec<f64> {
        let p = self.theta_hat.len();
        let mut out = vec![0.0; p];
        for m in &self.models {
            for (o, t) in out.iter_mut().zip(&m.theta_mean) {
                *o += m.weight * t;
            }
        }
        out
    }
}

/// P(δᵢ = 1 | y) from visit frequencies.
pub fn marginal_inclusion_probs(mp: &ModelPosterior) -> Vec<f64> {
    inclusion_from_weights(
        mp.p,
        mp.counts
            .iter()
            .map(|(m, &c)| (m, c as f64 / mp.iterations as f64)),
    )
}

fn inclusion_from_weights<'a>(
    p: usize,
    weights: impl Iterator<Item = (&'a ModelIndicator, f64)>,
) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for (m, w) in weights {
        for i in m.indices() {
            out[i] += w;
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out
}

pub fn bma_posterior_mean(
    mp: &ModelPosterior,
    data: &Dataset,
    spec: &PriorSpec,
    cfg: &BmaConfig,
) -> Result<BmaEstimate> {
    if mp.iterations == 0 || mp.counts.is_empty() {
        return Err(Error::EmptyPosterior);
    }
    let probs = posterior_model_probs(mp, None);
    let (plan, visited_mass) = match cfg.mode {
        BmaMode::TopK(k) => {
            let top: Vec<_> = probs.into_iter().take(k.max(1)).collect();
            let mass: f64 = top.iter().map(|t| t.1).sum();
            let plan = top
                .into_iter()
                .map(|(m, w)| (m, w / mass, cfg.draws_per_model))
                .collect::<Vec<_>>();
            (plan, mass)
        }
        BmaMode::Sampled => {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x5eed));
            let mut counts = vec![0usize; probs.len()];
            for _ in 0..cfg.draws_per_model {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = probs.len() - 1;
                for (j, (_, w)) in probs.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                counts[pick] += 1;
            }
            let total = cfg.draws_per_model as f64;
            let mut mass = 0.0;
            let plan = probs
                .into_iter()
                .zip(counts)
                .filter(|(_, c)| *c > 0)
                .map(|((m, w), c)| {
                    mass += w;
                    (m, c as f64 / total, c)
                })
                .collect::<Vec<_>>();
            (plan, mass)
        }
    };
    let mut est = average_models(data, spec, &plan, cfg)?;
    est.inclusion_probs = marginal_inclusion_probs(mp);
    est.visited_mass = visited_mass;
    Ok(est)
}

/// Mixture over explicit `(model, weight)` pairs, e.g. from enumeration.
pub fn bma_from_weights(
    data: &Dataset,
    spec: &PriorSpec,
    weights: &[(ModelIndicator, f64)],
    cfg: &BmaConfig,
) -> Result<BmaEstimate> {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if weights.is_empty() || total <= 0.0 {
        return Err(Error::EmptyPosterior);
    }
    let plan: Vec<_> = weights
        .iter()
        .map(|(m, w)| (m.clone(), w / total, cfg.draws_per_model))
        .collect();
    let mut est = average_models(data, spec, &plan, cfg)?;
    est.inclusion_probs = inclusion_from_weights(data.p(), plan.iter().map(|(m, w, _)| (m, *w)));
    est.visited_mass = total.min(1.0);
    Ok(est)
}

type Planned = (ModelIndicator, f64, usize);

fn average_models(
    data: &Dataset,
    spec: &PriorSpec,
    plan: &[Planned],
    cfg: &BmaConfig,
) -> Result<BmaEstimate> {
    let p = data.p();
    let burn = cfg.burn();
    let results: Vec<_> = plan
        .par_iter()
        .map(|(model, weight, kept)| {
            let seed = model_seed(cfg.seed, model);
            let chain_cfg = ChainConfig::new(burn + kept, seed).with_burn(burn);
            gibbs_sampler(data, model, spec, &chain_cfg).map(|out| (model, *weight, out))
        })
        .collect();

    let mut warnings = Vec::new();
    let mut ok = Vec::with_capacity(results.len());
    for (r, (model, _, _)) in results.into_iter().zip(plan) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                let msg = format!("model {model:?} excluded: {e}");
                warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    let kept_weight: f64 = ok.iter().map(|(_, w, _)| w).sum();
    if ok.is_empty() || kept_weight <= 0.0 {
        return Err(Error::EmptyPosterior);
    }

    let mut theta_hat = vec![0.0; p];
    let mut phi_hat = 0.0;
    let mut models = Vec::with_capacity(ok.len());
    let total_draws: usize = if cfg.keep_draws {
        ok.iter().map(|(_, _, o)| o.n_draws()).sum()
    } else {
        0
    };
    let mut draws = cfg.keep_draws.then(|| DMatrix::zeros(total_draws, p));
    let mut row = 0;
    for (model, w, out) in ok {
        let w = w / kept_weight;
        let mean = out.full_theta_mean();
        for i in 0..p {
            theta_hat[i] += w * mean[i];
        }
        phi_hat += w * out.phi_mean();
        let idx = model.indices();
        if let Some(d) = draws.as_mut() {
            for r in 0..out.n_draws() {
                for (j, &i) in idx.iter().enumerate() {
                    d[(row + r, i)] = out.theta[(r, j)];
                }
            }
            row += out.n_draws();
        }
        models.push(ModelSummary {
            model: model.clone(),
            weight: w,
            theta_mean: mean.iter().copied().collect(),
            phi_mean: out.phi_mean(),
            n_draws: out.n_draws(),
            seed: out.seed,
            mh_acceptance: out.mh_acceptance,
            lag1_theta: (0..idx.len())
                .map(|j| autocorrelation(&out.theta_column(j), 1))
                .collect(),
            lag1_phi: autocorrelation(&out.phi, 1),
        });
    }
    Ok(BmaEstimate {
        theta_hat,
        phi_hat,
        inclusion_probs: vec![0.0; p],
        models,
        visited_mass: 0.0,
        warnings,
        draws,
    })
}

/// Point prediction `X_new θ̂`.
pub fn predict(theta_hat: &[f64], x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x_new.ncols() != theta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_hat.len(),
            got: x_new.ncols(),
        });
    }
    Ok(x_new * DVector::from_column_slice(theta_hat))
}

/// Equal-tailed intervals for `X_new θ` from retained draws.
pub fn predict_interval(
    draws: &DMatrix<f64>,
    x_new: &DMatrix<f64>,
    level: f64,
) -> Result<Vec<(f64, f64)>> {
    if x_new.ncols() != draws.ncols() {
        return Err(Error::DimensionMismatch {
            expected: draws.ncols(),
            got: x_new.ncols(),
        });
    }
    if !(0.0 < level && level < 1.0) || draws.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "need draws and a level in (0, 1), got {} draws and level {level}",
            draws.nrows()
        )));
    }
    let fitted = draws * x_new.transpose();
    let lo_q = 0.5 * (1.0 - level);
    Ok(fitted
        .column_iter()
        .map(|col| {
            let mut v: Vec<f64> = col.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            (quantile_sorted(&v, lo_q), quantile_sorted(&v, 1.0 - lo_q))
        })
        .collect())
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
