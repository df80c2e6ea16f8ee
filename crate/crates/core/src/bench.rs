//! Simulation studies, baselines and empirical shrinkage rates.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bma::{bma_from_weights, bma_posterior_mean, BmaConfig};
use crate::conjugate::ConjugateFit;
use crate::data::{Dataset, ModelIndicator};
use crate::diagnostics::{correlation, mean, variance};
use crate::error::{Error, Result};
use crate::marglik::log_marginal_normal_ig;
use crate::modelsearch::{
    gibbs_model_search, log_model_prior, Evidence, MarginalCache, NlpEvidence, SearchConfig,
};
use crate::priors::{Family, PriorSpec};
use crate::rng::{derive_seed, rng_from_seed};

/// Coefficients of the high-dimensional design: five signals then zeros.
pub const SIGNALS: [f64; 5] = [0.6, 1.2, 1.8, 2.4, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub theta_star: Vec<f64>,
    pub phi_star: f64,
    pub rho: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl SimConfig {
    /// `SIGNALS` in the first `min(p, 5)` coordinates, zeros elsewhere.
    pub fn sparse(n: usize, p: usize, rho: f64, replicates: usize, seed: u64) -> Result<Self> {
        let mut theta_star = vec![0.0; p];
        for (t, s) in theta_star.iter_mut().zip(SIGNALS) {
            *t = s;
        }
        let cfg = Self {
            n,
            p,
            theta_star,
            phi_star: 1.0,
            rho,
            replicates,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Desk-scale preset: n = 100, p = 100, ρ = 0, five replicates.
    pub fn sim_small(seed: u64) -> Self {
        Self::sparse(100, 100, 0.0, 5, seed).expect("preset is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_star.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: self.theta_star.len(),
            });
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.phi_star <= 0.0 || !self.phi_star.is_finite() {
            return Err(Error::InvalidArgument(format!("phi_star must be positive, got {}", self.phi_star)));
        }
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidArgument("n and p must be positive".into()));
        }
        Ok(())
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.p).filter(|&i| self.theta_star[i] != 0.0).collect()
    }
}

/// Rows `√ρ·z·1 + √(1−ρ)·ε`, so columns have unit variance and pairwise
/// correlation ρ; `y = Xθ* + √φ*·e`.
pub fn gen_equicorr_data(cfg: &SimConfig, replicate: usize) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, replicate as u64));
    let (a, b) = (cfg.rho.sqrt(), (1.0 - cfg.rho).sqrt());
    let mut x = DMatrix::zeros(cfg.n, cfg.p);
    for i in 0..cfg.n {
        let z: f64 = StandardNormal.sample(&mut rng);
        for j in 0..cfg.p {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[(i, j)] = a * z + b * e;
        }
    }
    let sd = cfg.phi_star.sqrt();
    let theta = DVector::from_column_slice(&cfg.theta_star);
    let mut y = &x * theta;
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += sd * e;
    }
    Dataset::new(y, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SseParts {
    pub total: f64,
    pub zero_part: f64,
    pub nonzero_part: f64,
}

/// Σ(θ̂ᵢ − θᵢ*)² split by the support of θ*.
pub fn sse(theta_hat: &[f64], theta_star: &[f64]) -> Result<SseParts> {
    if theta_hat.len() != theta_star.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_star.len(),
            got: theta_hat.len(),
        });
    }
    let mut zero_part = 0.0;
    let mut nonzero_part = 0.0;
    for (h, s) in theta_hat.iter().zip(theta_star) {
        let d = (h - s) * (h - s);
        if *s == 0.0 {
            zero_part += d;
        } else {
            nonzero_part += d;
        }
    }
    Ok(SseParts {
        total: zero_part + nonzero_part,
        zero_part,
        nonzero_part,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Nlp(Family),
    Ridge,
    OlsOracle,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Nlp(Family::Pmom),
        Method::Nlp(Family::Pimom),
        Method::Nlp(Family::Pemom),
        Method::Ridge,
        Method::OlsOracle,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Nlp(fam) => write!(f, "{fam}"),
            Method::Ridge => f.write_str("ridge"),
            Method::OlsOracle => f.write_str("ols-oracle"),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ridge" => Ok(Method::Ridge),
            "ols-oracle" | "ols_oracle" | "oracle" => Ok(Method::OlsOracle),
            other => other.parse().map(Method::Nlp),
        }
    }
}

/// Settings for the non-local-prior fits inside a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitSettings {
    pub search_sweeps: usize,
    pub search_samples: usize,
    pub bma_draws: usize,
    pub burn_fraction: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            search_sweeps: 200,
            search_samples: 1_000,
            bma_draws: 1_000,
            burn_fraction: 0.1,
        }
    }
}

/// Ridge coefficients with the penalty picked by generalized cross-validation.
pub fn ridge_gcv(data: &Dataset) -> Result<Vec<f64>> {
    let (n, p) = (data.n(), data.p());
    let svd = data.x().clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let d = &svd.singular_values;
    let uty = u.tr_mul(data.y());
    let yty = data.yty();
    let d2max = d.iter().map(|v| v * v).fold(0.0, f64::max);
    if d2max == 0.0 {
        return Ok(vec![0.0; p]);
    }
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=100 {
        let lambda = d2max * 10f64.powf(-8.0 + 0.1 * k as f64);
        let mut fit_sq = 0.0;
        let mut cross = 0.0;
        let mut trace = 0.0;
        for (j, &dj) in d.iter().enumerate() {
            let h = dj * dj / (dj * dj + lambda);
            trace += h;
            fit_sq += h * h * uty[j] * uty[j];
            cross += h * uty[j] * uty[j];
        }
        let rss = (yty - 2.0 * cross + fit_sq).max(0.0);
        let denom = (n as f64 - trace).max(1e-12);
        let gcv = n as f64 * rss / (denom * denom);
        if gcv < best.0 {
            best = (gcv, lambda);
        }
    }
    let lambda = best.1;
    let coef = DVector::from_fn(d.len(), |j, _| d[j] / (d[j] * d[j] + lambda) * uty[j]);
    Ok((v_t.tr_mul(&coef)).iter().copied().collect())
}

/// Least squares on the given support, zeros elsewhere.
pub fn ols_on_support(data: &Dataset, support: &[usize]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; data.p()];
    if support.is_empty() {
        return Ok(out);
    }
    let g = data.sub_gram(support);
    let c = data.sub_xty(support);
    let chol = g.cholesky().ok_or(Error::RankDeficient {
        rank: 0,
        cols: support.len(),
    })?;
    let b = chol.solve(&c);
    for (j, &i) in support.iter().enumerate() {
        out[i] = b[j];
    }
    Ok(out)
}

/// Model search followed by sampled-δ model averaging.
pub fn fit_nlp(data: &Dataset, spec: &PriorSpec, settings: &FitSettings, seed: u64) -> Result<Vec<f64>> {
    let evidence = NlpEvidence::new(*spec, settings.search_samples, derive_seed(seed, 1));
    let search = SearchConfig::new(settings.search_sweeps, derive_seed(seed, 2));
    let mp = gibbs_model_search(data, &evidence, &search, &MarginalCache::new())?;
    let mut cfg = BmaConfig::new(derive_seed(seed, 3));
    cfg.draws_per_model = settings.bma_draws;
    cfg.burn_fraction = settings.burn_fraction;
    Ok(bma_posterior_mean(&mp, data, spec, &cfg)?.theta_hat)
}

pub fn fit_method(
    method: Method,
    data: &Dataset,
    support: &[usize],
    settings: &FitSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    match method {
        Method::Nlp(fam) => fit_nlp(data, &PriorSpec::default_for(fam), settings, seed),
        Method::Ridge => ridge_gcv(data),
        Method::OlsOracle => ols_on_support(data, support),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub method: Method,
    pub total: f64,
    pub zero_part: f64,
    pub nonzero_part: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_total: f64,
    pub se_total: f64,
    pub mean_zero: f64,
    pub se_zero: f64,
    pub mean_nonzero: f64,
    pub se_nonzero: f64,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SseReport {
    pub config: SimConfig,
    pub settings: FitSettings,
    pub methods: Vec<MethodSummary>,
    pub rows: Vec<ReplicateRow>,
}

impl SseReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// One CSV line per replicate × method.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate,method,total,zero_part,nonzero_part\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e}\n",
                r.replicate, r.method, r.total, r.zero_part, r.nonzero_part
            ));
        }
        out
    }
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    match x.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (x[0], f64::NAN),
        n => (mean(x), (variance(x) / n as f64).sqrt()),
    }
}

pub fn run_sim_study(cfg: &SimConfig, methods: &[Method], settings: &FitSettings) -> Result<SseReport> {
    cfg.validate()?;
    let support = cfg.support();
    let jobs: Vec<(usize, Method)> = (0..cfg.replicates)
        .flat_map(|r| methods.iter().map(move |&m| (r, m)))
        .collect();
    let results: Vec<(usize, Method, Result<SseParts>)> = jobs
        .par_iter()
        .map(|&(r, m)| {
            let res = gen_equicorr_data(cfg, r).and_then(|data| {
                let seed = derive_seed(derive_seed(cfg.seed, 1 << 32 | r as u64), method_stream(m));
                let theta = fit_method(m, &data, &support, settings, seed)?;
                sse(&theta, &cfg.theta_star)
            });
            (r, m, res)
        })
        .collect();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &m in methods {
        let mut failures = 0;
        let mut parts = Vec::new();
        for (r, mm, res) in &results {
            if *mm != m {
                continue;
            }
            match res {
                Ok(s) => {
                    parts.push(*s);
                    rows.push(ReplicateRow {
                        replicate: *r,
                        method: m,
                        total: s.total,
                        zero_part: s.zero_part,
                        nonzero_part: s.nonzero_part,
                    });
                }
                Err(e) => {
                    warn!("replicate {r} method {m} failed: {e}");
                    failures += 1;
                }
            }
        }
        let col = |f: fn(&SseParts) -> f64| parts.iter().map(f).collect::<Vec<_>>();
        let (mean_total, se_total) = mean_se(&col(|s| s.total));
        let (mean_zero, se_zero) = mean_se(&col(|s| s.zero_part));
        let (mean_nonzero, se_nonzero) = mean_se(&col(|s| s.nonzero_part));
        summaries.push(MethodSummary {
            method: m,
            mean_total,
            se_total,
            mean_zero,
            se_zero,
            mean_nonzero,
            se_nonzero,
            replicates: parts.len(),
            failures,
        });
    }
    rows.sort_by(|a, b| a.replicate.cmp(&b.replicate).then(a.method.cmp(&b.method)));
    Ok(SseReport {
        config: cfg.clone(),
        settings: *settings,
        methods: summaries,
        rows,
    })
}

fn method_stream(m: Method) -> u64 {
    match m {
        Method::Nlp(Family::Pmom) => 1,
        Method::Nlp(Family::Pimom) => 2,
        Method::Nlp(Family::Pemom) => 3,
        Method::Ridge => 4,
        Method::OlsOracle => 5,
    }
}

/// Mean |θ̂| over spurious coordinates against n, for a non-local prior and
/// for the conjugate Normal prior on the same data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageReport {
    pub family: Family,
    pub n_grid: Vec<usize>,
    pub nlp_mean_abs: Vec<f64>,
    pub lp_mean_abs: Vec<f64>,
    /// Slope of ln mean|θ̂| on ln n.
    pub nlp_slope_log_n: f64,
    pub lp_slope_log_n: f64,
    /// Slope of ln mean|θ̂| on √n.
    pub nlp_slope_sqrt_n: f64,
    /// Grid points whose non-local mean underflowed to zero.
    pub censored: usize,
}

/// True coefficients used by [`empirical_shrinkage_rate`].
pub const SHRINKAGE_SIGNALS: [f64; 2] = [1.0, 0.5];
const CENSOR_FLOOR: f64 = 1e-300;
/// Models below this posterior weight contribute at most this much to |θ̂|
/// and are skipped by the conditional-mean chains.
const MIN_CHAIN_WEIGHT: f64 = 1e-12;

/// Models with at most `max_size` variables, in size-then-lexicographic order.
fn models_up_to(p: usize, max_size: usize) -> Vec<ModelIndicator> {
    fn rec(p: usize, start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<ModelIndicator>) {
        out.push(ModelIndicator::from_indices(p, cur).expect("indices < p"));
        if left == 0 {
            return;
        }
        for i in start..p {
            cur.push(i);
            rec(p, i + 1, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(p, 0, max_size, &mut Vec::new(), &mut out);
    out
}

fn normalized_weights(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// One batch of the shrinkage-rate experiment.
///
/// For every n in `n_grid` and each replicate, data are drawn with
/// `SHRINKAGE_SIGNALS` followed by `p_fixed − 2` zeros. The posterior over
/// models with at most three variables is computed exactly, and the model
/// averaged estimate of every spurious coefficient is formed with Gibbs
/// conditional means (non-local prior) or conjugate means (Normal prior
/// with τ = 1).
pub fn empirical_shrinkage_rate(
    family: Family,
    n_grid: &[usize],
    p_fixed: usize,
    replicates: usize,
    seed: u64,
) -> Result<ShrinkageReport> {
    if n_grid.len() < 4 {
        return Err(Error::InvalidArgument("shrinkage slope needs at least 4 sample sizes".into()));
    }
    if p_fixed <= SHRINKAGE_SIGNALS.len() {
        return Err(Error::InvalidArgument("p must exceed the true model size".into()));
    }
    let spec = PriorSpec::default_for(family);
    let lp_tau = 1.0;
    let max_size = SHRINKAGE_SIGNALS.len() + 1;
    let models = models_up_to(p_fixed, max_size);
    let mut theta_star = vec![0.0; p_fixed];
    theta_star[..SHRINKAGE_SIGNALS.len()].copy_from_slice(&SHRINKAGE_SIGNALS);
    let spurious: Vec<usize> = (SHRINKAGE_SIGNALS.len()..p_fixed).collect();

    let jobs: Vec<(usize, usize)> = (0..n_grid.len())
        .flat_map(|g| (0..replicates).map(move |r| (g, r)))
        .collect();
    let per_job: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let n = n_grid[g];
            let cfg = SimConfig {
                n,
                p: p_fixed,
                theta_star: theta_star.clone(),
                phi_star: 1.0,
                rho: 0.0,
                replicates,
                seed: derive_seed(seed, n as u64),
            };
            let data = gen_equicorr_data(&cfg, r)?;
            let job_seed = derive_seed(cfg.seed, r as u64 + 7);
            let ev = NlpEvidence::new(spec, 1_000, job_seed);
            let nlp_scores: Vec<f64> = models
                .iter()
                .map(|m| {
                    ev.log_evidence(&data, m).map(|l| l.value).unwrap_or(f64::NEG_INFINITY)
                        + log_model_prior(m, p_fixed, n)
                })
                .collect();
            let lp_scores: Vec<f64> = models
                .iter()
                .map(|m| {
                    log_marginal_normal_ig(&data, m, lp_tau, spec.a_phi, spec.b_phi)
                        .map(|l| l.value)
                        .unwrap_or(f64::NEG_INFINITY)
                        + log_model_prior(m, p_fixed, n)
                })
                .collect();
            let nlp_w = normalized_weights(&nlp_scores);
            let lp_w = normalized_weights(&lp_scores);

            // conjugate means
            let mut lp_hat = vec![0.0; p_fixed];
            for (m, w) in models.iter().zip(&lp_w) {
                if *w == 0.0 || m.is_empty() {
                    continue;
                }
                let idx = m.indices();
                let fit = ConjugateFit::new(&data, &idx, lp_tau)?;
                for (j, &i) in idx.iter().enumerate() {
                    lp_hat[i] += w * fit.mean[j];
                }
            }

            // Gibbs means for models that carry a spurious variable
            let weighted: Vec<(ModelIndicator, f64)> = models
                .iter()
                .zip(&nlp_w)
                .filter(|(m, w)| **w > MIN_CHAIN_WEIGHT && spurious.iter().any(|&i| m.contains(i)))
                .map(|(m, w)| (m.clone(), *w))
                .collect();
            let mut nlp_hat = vec![0.0; p_fixed];
            if !weighted.is_empty() {
                let mass: f64 = weighted.iter().map(|w| w.1).sum();
                let mut bcfg = BmaConfig::new(derive_seed(job_seed, 99));
                bcfg.draws_per_model = 2_000;
                let est = bma_from_weights(&data, &spec, &weighted, &bcfg)?;
                for (h, t) in nlp_hat.iter_mut().zip(&est.theta_hat) {
                    *h = t * mass;
                }
            }
            let avg = |v: &[f64]| spurious.iter().map(|&i| v[i].abs()).sum::<f64>() / spurious.len() as f64;
            Ok((avg(&nlp_hat), avg(&lp_hat)))
        })
        .collect();

    let mut nlp_mean_abs = vec![0.0; n_grid.len()];
    let mut lp_mean_abs = vec![0.0; n_grid.len()];
    for ((g, _), res) in jobs.iter().zip(per_job) {
        let (a, b) = res?;
        nlp_mean_abs[*g] += a / replicates as f64;
        lp_mean_abs[*g] += b / replicates as f64;
    }
    let censored = nlp_mean_abs.iter().filter(|v| **v < CENSOR_FLOOR).count();
    let ln = |v: &[f64]| v.iter().map(|x| x.max(CENSOR_FLOOR).ln()).collect::<Vec<_>>();
    let log_n: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let sqrt_n: Vec<f64> = n_grid.iter().map(|&n| (n as f64).sqrt()).collect();
    Ok(ShrinkageReport {
        family,
        n_grid: n_grid.to_vec(),
        nlp_slope_log_n: slope(&log_n, &ln(&nlp_mean_abs)),
        lp_slope_log_n: slope(&log_n, &ln(&lp_mean_abs)),
        nlp_slope_sqrt_n: slope(&sqrt_n, &ln(&nlp_mean_abs)),
        nlp_mean_abs,
        lp_mean_abs,
        censored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooReport {
    pub r2: f64,
    /// Set when predictions were constant and R² was defined as 0.
    pub constant_predictions: bool,
    pub predictions: Vec<f64>,
}

/// Leave-one-out cross-validated squared correlation between held-out
/// predictions and observations.
pub fn loo_cv_r2(data: &Dataset, method: Method, settings: &FitSettings, seed: u64) -> Result<LooReport> {
    let n = data.n();
    if n < 10 {
        return Err(Error::InvalidArgument(format!("leave-one-out needs n >= 10, got {n}")));
    }
    let support: Vec<usize> = (0..data.p()).collect();
    let predictions: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let train = data.select_rows(&rows)?;
            let theta = fit_method(method, &train, &support, settings, derive_seed(seed, i as u64))?;
            Ok(data.x().row(i).iter().zip(&theta).map(|(a, b)| a * b).sum())
        })
        .collect::<Result<_>>()?;
    let y: Vec<f64> = data.y().iter().copied().collect();
    let r = correlation(&predictions, &y);
    Ok(if r.is_nan() {
        LooReport {
            r2: 0.0,
            constant_predictions: true,
            predictions,
        }
    } else {
        LooReport {
            r2: r * r,
            constant_predictions: false,
            predictions,
        }
    })
}
