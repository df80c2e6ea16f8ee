//! Gibbs search over inclusion indicators.
//!
//! Each sweep visits every variable and redraws δᵢ from its full conditional,
//! comparing the two neighbouring models through cached log marginal
//! likelihoods plus the log model prior. Models with more than n variables
//! have zero prior mass and are never entered.

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::data::{Dataset, ModelIndicator};
use crate::error::{Error, Result};
use crate::marglik::{log_marginal_nlp, log_marginal_normal_ig, LogMarginal};
use crate::priors::PriorSpec;
use crate::rng::{derive_seed, rng_from_seed};

/// Source of log marginal likelihoods. Implementations must be
/// deterministic in `(data, model)`.
pub trait Evidence: Sync {
    fn log_evidence(&self, data: &Dataset, model: &ModelIndicator) -> Result<LogMarginal>;
}

/// Non-local prior evidence; Monte Carlo seeds are derived from the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NlpEvidence {
    pub spec: PriorSpec,
    pub n_samples: usize,
    pub seed: u64,
}

impl NlpEvidence {
    pub fn new(spec: PriorSpec, n_samples: usize, seed: u64) -> Self {
        Self {
            spec,
            n_samples,
            seed,
        }
    }
}

impl Evidence for NlpEvidence {
    fn log_evidence(&self, data: &Dataset, model: &ModelIndicator) -> Result<LogMarginal> {
        log_marginal_nlp(data, model, &self.spec, self.n_samples, model_seed(self.seed, model))
    }
}

/// Conjugate Normal prior θ ~ N(0, τφI), the local-prior baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalNormalEvidence {
    pub tau: f64,
    pub a_phi: f64,
    pub b_phi: f64,
}

impl Evidence for LocalNormalEvidence {
    fn log_evidence(&self, data: &Dataset, model: &ModelIndicator) -> Result<LogMarginal> {
        log_marginal_normal_ig(data, model, self.tau, self.a_phi, self.b_phi)
    }
}

/// Stream seed for a model, independent of visit order.
pub fn model_seed(base: u64, model: &ModelIndicator) -> u64 {
    let mut s = derive_seed(base, model.p() as u64);
    for i in model.indices() {
        s = derive_seed(s, i as u64 + 1);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPrior {
    /// Beta-Binomial(1, 1) truncated at |δ| ≤ n.
    #[default]
    BetaBinomial,
    /// Equal mass on every model with |δ| ≤ n.
    Uniform,
}

/// Log prior mass of δ; −∞ when |δ| > n.
pub fn log_model_prior(delta: &ModelIndicator, p: usize, n: usize) -> f64 {
    log_model_prior_with(ModelPrior::BetaBinomial, delta.size(), p, n)
}

fn log_model_prior_with(prior: ModelPrior, size: usize, p: usize, n: usize) -> f64 {
    if size > n || size > p {
        return f64::NEG_INFINITY;
    }
    match prior {
        ModelPrior::BetaBinomial => -((p + 1) as f64).ln() - ln_choose(p, size),
        ModelPrior::Uniform => 0.0,
    }
}

pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Log marginals keyed by model, shared between chains. Failed evaluations
/// are stored as −∞ so a model is quarantined once.
#[derive(Debug, Default)]
pub struct MarginalCache {
    map: RwLock<HashMap<ModelIndicator, f64>>,
}

impl MarginalCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &ModelIndicator) -> Option<f64> {
        self.map.read().expect("cache lock").get(model).copied()
    }

    pub fn get_or_compute<E: Evidence + ?Sized>(
        &self,
        evidence: &E,
        data: &Dataset,
        model: &ModelIndicator,
    ) -> f64 {
        if let Some(v) = self.get(model) {
            return v;
        }
        let v = match evidence.log_evidence(data, model) {
            Ok(lm) if !lm.value.is_nan() => lm.value,
            Ok(_) => {
                warn!("model {model:?}: marginal likelihood is NaN; quarantined");
                f64::NEG_INFINITY
            }
            Err(e) => {
                warn!("model {model:?}: marginal likelihood failed ({e}); quarantined");
                f64::NEG_INFINITY
            }
        };
        // first writer wins so every reader sees one frozen value
        *self
            .map
            .write()
            .expect("cache lock")
            .entry(model.clone())
            .or_insert(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub n_sweeps: usize,
    /// Sweeps discarded before counting visits.
    pub burn: usize,
    pub seed: u64,
    pub random_order: bool,
    pub model_prior: ModelPrior,
}

impl SearchConfig {
    pub fn new(n_sweeps: usize, seed: u64) -> Self {
        Self {
            n_sweeps,
            burn: 0,
            seed,
            random_order: false,
            model_prior: ModelPrior::BetaBinomial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelPosterior {
    pub p: usize,
    pub n: usize,
    pub counts: BTreeMap<ModelIndicator, u64>,
    pub iterations: u64,
    pub seed: u64,
    /// Log marginal likelihood of every visited model.
    pub log_marginals: BTreeMap<ModelIndicator, f64>,
}

impl ModelPosterior {
    pub fn n_visited(&self) -> usize {
        self.counts.len()
    }

    pub fn frequency(&self, model: &ModelIndicator) -> f64 {
        self.counts.get(model).copied().unwrap_or(0) as f64 / self.iterations as f64
    }
}

/// Scores `log m + log prior` for a model through the cache.
fn score<E: Evidence + ?Sized>(
    evidence: &E,
    cache: &MarginalCache,
    data: &Dataset,
    model: &ModelIndicator,
    prior: ModelPrior,
) -> f64 {
    let lp = log_model_prior_with(prior, model.size(), data.p(), data.n());
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    cache.get_or_compute(evidence, data, model) + lp
}

pub fn gibbs_model_search<E: Evidence + ?Sized>(
    data: &Dataset,
    evidence: &E,
    cfg: &SearchConfig,
    cache: &MarginalCache,
) -> Result<ModelPosterior> {
    let p = data.p();
    if cfg.n_sweeps <= cfg.burn {
        return Err(Error::InvalidArgument(format!(
            "{} sweeps leave nothing after a burn-in of {}",
            cfg.n_sweeps, cfg.burn
        )));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut current = ModelIndicator::empty(p);
    let mut current_score = score(evidence, cache, data, &current, cfg.model_prior);
    let mut order: Vec<usize> = (0..p).collect();
    let mut counts = BTreeMap::new();
    for sweep in 0..cfg.n_sweeps {
        if cfg.random_order {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            let flipped = current.with(i, !current.contains(i));
            let flipped_score = score(evidence, cache, data, &flipped, cfg.model_prior);
            let (on_score, off_score) = if current.contains(i) {
                (current_score, flipped_score)
            } else {
                (flipped_score, current_score)
            };
            let p_on = if on_score == f64::NEG_INFINITY {
                0.0
            } else if off_score == f64::NEG_INFINITY {
                1.0
            } else {
                1.0 / (1.0 + (off_score - on_score).exp())
            };
            let want_on = rng.random::<f64>() < p_on;
            if want_on != current.contains(i) {
                current = flipped;
                current_score = flipped_score;
            }
        }
        if sweep >= cfg.burn {
            *counts.entry(current.clone()).or_insert(0u64) += 1;
        }
    }
    let log_marginals = counts
        .keys()
        .map(|m: &ModelIndicator| (m.clone(), cache.get(m).unwrap_or(f64::NEG_INFINITY)))
        .collect();
    Ok(ModelPosterior {
        p,
        n: data.n(),
        counts,
        iterations: (cfg.n_sweeps - cfg.burn) as u64,
        seed: cfg.seed,
        log_marginals,
    })
}

/// Visit frequencies in decreasing order, ties by model key; `top_k = None`
/// returns every visited model.
pub fn posterior_model_probs(
    mp: &ModelPosterior,
    top_k: Option<usize>,
) -> Vec<(ModelIndicator, f64)> {
    let total = mp.iterations as f64;
    let mut out: Vec<(ModelIndicator, f64)> = mp
        .counts
        .iter()
        .map(|(m, &c)| (m.clone(), c as f64 / total))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(k) = top_k {
        out.truncate(k);
    }
    out
}

/// Exact posterior over all 2^p models, in decreasing probability.
pub fn enumerate_posterior<E: Evidence + ?Sized>(
    data: &Dataset,
    evidence: &E,
    prior: ModelPrior,
) -> Result<Vec<(ModelIndicator, f64)>> {
    let p = data.p();
    if p > 20 {
        return Err(Error::InvalidArgument(format!(
            "enumeration over 2^{p} models is not supported (p <= 20)"
        )));
    }
    let cache = MarginalCache::new();
    let mut scored = Vec::with_capacity(1 << p);
    for mask in 0u64..(1u64 << p) {
        let idx: Vec<usize> = (0..p).filter(|i| mask >> i & 1 == 1).collect();
        let m = ModelIndicator::from_indices(p, &idx)?;
        let s = score(evidence, &cache, data, &m, prior);
        scored.push((m, s));
    }
    let max = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::EmptyPosterior);
    }
    let z: f64 = scored.iter().map(|s| (s.1 - max).exp()).sum();
    let mut out: Vec<(ModelIndicator, f64)> = scored
        .into_iter()
        .map(|(m, s)| (m, (s - max).exp() / z))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}
