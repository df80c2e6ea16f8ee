//! Non-local priors as mixtures of truncated local priors.
//!
//! For a penalty `d` and local kernel `π^L`, drawing a truncation point
//! `λ ~ π(λ) ∝ P_u(d(θ) > λ)` and then `θ ~ π^L(θ) I(d(θ) > λ)` reproduces the
//! non-local prior `∝ d(θ) π^L(θ)`. For pMOM (r = 1) with `π^L = N(0, τ)` and
//! `λ` on the `θ²` scale, `π(λ) = h(λ/τ)/τ` where `h` is the χ²₁ survival
//! function; the cdf of `λ` is tabulated once and inverted by interpolation.
//!
//! Only the per-coordinate (multiple truncation) construction is provided as a
//! sampler. A single shared truncation over `∏θᵢ²` needs the survival function
//! of a product of χ²₁ variables and is not implemented.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use libm::erfc;

use crate::error::{ensure_positive, Error, Result};
use crate::priors::{Family, PriorSpec};
use crate::quadrature::Quadrature;
use crate::rng::{open_unit, rng_from_seed};
use crate::tmvn;

/// P(χ²₁ > x).
pub fn chi1_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    erfc((0.5 * x).sqrt())
}

pub const DEFAULT_GRID_SIZE: usize = 1 << 16;
const V_MIN: f64 = 1e-10;
const V_MAX: f64 = 80.0;

/// Tabulated cdf of the truncation point λ, `P(λ ≤ u) = H(u/τ)` with
/// `H(v) = ∫₀^v h(s) ds`.
#[derive(Debug, Clone)]
pub struct LambdaTable {
    tau: f64,
    /// knots on the `v = λ/τ` scale
    knots: Vec<f64>,
    cdf: Vec<f64>,
    total_mass: f64,
}

impl LambdaTable {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `∫₀^∞ π(λ) dλ` as computed during tabulation.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Interpolated P(λ ≤ lambda).
    pub fn cdf(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        let v = lambda / self.tau;
        if v <= self.knots[0] {
            return self.cdf[0] * v / self.knots[0];
        }
        let last = self.knots.len() - 1;
        if v >= self.knots[last] {
            return 1.0 - asymptotic_tail(v).min(1.0 - self.cdf[last]);
        }
        let k = self.knots.partition_point(|&x| x <= v) - 1;
        let w = (v - self.knots[k]) / (self.knots[k + 1] - self.knots[k]);
        self.cdf[k] + w * (self.cdf[k + 1] - self.cdf[k])
    }

    /// λ with P(λ ≤ value) = u.
    pub fn inverse(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        let v = if u <= self.cdf[0] {
            self.knots[0] * u / self.cdf[0]
        } else if u >= self.cdf[self.cdf.len() - 1] {
            invert_asymptotic_tail(1.0 - u)
        } else {
            let k = self.cdf.partition_point(|&c| c <= u) - 1;
            let span = self.cdf[k + 1] - self.cdf[k];
            if span > 0.0 {
                self.knots[k] + (u - self.cdf[k]) / span * (self.knots[k + 1] - self.knots[k])
            } else {
                self.knots[k]
            }
        };
        self.tau * v
    }
}

/// Leading-order tail `∫_v^∞ h(s) ds ≈ 2 h(v)` for large `v`.
fn asymptotic_tail(v: f64) -> f64 {
    2.0 * (2.0 / (PI * v)).sqrt() * (-0.5 * v).exp()
}

fn invert_asymptotic_tail(mass: f64) -> f64 {
    let target = mass.ln();
    let f = |v: f64| (2.0f64).ln() + 0.5 * (2.0 / (PI * v)).ln() - 0.5 * v - target;
    let (mut lo, mut hi) = (V_MAX, V_MAX);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn tabulate_lambda_inverse_cdf(tau: f64, grid_size: usize) -> Result<LambdaTable> {
    ensure_positive("tau", tau)?;
    if grid_size < 64 {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be at least 64, got {grid_size}"
        )));
    }
    let quad = Quadrature {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_subdivisions: 200,
    };
    let (lmin, lmax) = (V_MIN.ln(), V_MAX.ln());
    let knots: Vec<f64> = (0..grid_size)
        .map(|k| (lmin + (lmax - lmin) * k as f64 / (grid_size - 1) as f64).exp())
        .collect();
    let mut cdf = Vec::with_capacity(grid_size);
    let mut acc = quad.integrate(chi1_survival, 0.0, knots[0])?.value;
    cdf.push(acc);
    for w in knots.windows(2) {
        acc += quad.integrate(chi1_survival, w[0], w[1])?.value;
        cdf.push(acc);
    }
    let tail = quad
        .integrate_to_infinity(chi1_survival, V_MAX, 1.0)?
        .value;
    let total_mass = acc + tail;
    if (total_mass - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization {
            integral: total_mass,
            expected: 1.0,
            tolerance: 1e-6,
        });
    }
    for c in &mut cdf {
        *c /= total_mass;
    }
    Ok(LambdaTable {
        tau,
        knots,
        cdf,
        total_mass,
    })
}

/// Draw `|x| > threshold` from a standard Normal, symmetric in sign.
fn two_sided_tail<R: Rng + ?Sized>(threshold: f64, rng: &mut R) -> f64 {
    let x = tmvn::std_normal_in_piece(threshold, f64::INFINITY, rng);
    if rng.random::<bool>() {
        x
    } else {
        -x
    }
}

/// Independent pMOM (r = 1) prior draws, `n_draws × p`, via the truncation
/// mixture.
pub fn sample_pmom_prior(p: usize, tau: f64, n_draws: usize, seed: u64) -> Result<DMatrix<f64>> {
    let table = tabulate_lambda_inverse_cdf(tau, DEFAULT_GRID_SIZE)?;
    sample_pmom_prior_with(&table, p, n_draws, seed)
}

pub fn sample_pmom_prior_with(
    table: &LambdaTable,
    p: usize,
    n_draws: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let sd = table.tau.sqrt();
    let mut out = DMatrix::zeros(n_draws, p);
    for i in 0..n_draws {
        for j in 0..p {
            let lambda = table.inverse(open_unit(&mut rng));
            // θ ~ N(0, τ) restricted to θ² > λ
            out[(i, j)] = sd * two_sided_tail((lambda / table.tau).sqrt(), &mut rng);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RejectionDraws {
    pub draws: Vec<f64>,
    pub acceptance_rate: f64,
}

pub const MIN_ACCEPTANCE: f64 = 1e-3;

/// Exact univariate peMOM / piMOM draws by envelope rejection.
///
/// peMOM uses the N(0, τφ) kernel and accepts with probability
/// `exp(−τφ/θ²)`. piMOM uses a Cauchy envelope with scale `√(τφ)`; the
/// density ratio is `√π (1 + w) e^{−w}` with `w = τφ/θ²`, bounded by `√π`.
pub fn sample_nlp_prior_rejection(
    spec: &PriorSpec,
    phi: f64,
    n_draws: usize,
    seed: u64,
) -> Result<RejectionDraws> {
    ensure_positive("phi", phi)?;
    let tp = spec.tau * phi;
    let mut rng = rng_from_seed(seed);
    let mut draws = Vec::with_capacity(n_draws);
    let mut proposed: u64 = 0;
    let check = |accepted: usize, proposed: u64| -> Result<()> {
        if proposed >= 10_000 {
            let rate = accepted as f64 / proposed as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::LowAcceptance {
                    rate,
                    minimum: MIN_ACCEPTANCE,
                });
            }
        }
        Ok(())
    };
    match spec.family {
        Family::Pemom => {
            let env = Normal::new(0.0, tp.sqrt()).expect("positive scale");
            while draws.len() < n_draws {
                let theta: f64 = env.sample(&mut rng);
                proposed += 1;
                if theta != 0.0 && rng.random::<f64>() < (-tp / (theta * theta)).exp() {
                    draws.push(theta);
                }
                check(draws.len(), proposed)?;
            }
        }
        Family::Pimom => {
            let env = Cauchy::new(0.0, tp.sqrt()).expect("positive scale");
            while draws.len() < n_draws {
                let theta: f64 = env.sample(&mut rng);
                proposed += 1;
                if theta != 0.0 {
                    let w = tp / (theta * theta);
                    if rng.random::<f64>() < (1.0 + w) * (-w).exp() {
                        draws.push(theta);
                    }
                }
                check(draws.len(), proposed)?;
            }
        }
        Family::Pmom => {
            return Err(Error::InvalidArgument(
                "rejection sampler covers peMOM and piMOM; use sample_pmom_prior for pMOM".into(),
            ))
        }
    }
    let acceptance_rate = if proposed == 0 {
        1.0
    } else {
        n_draws as f64 / proposed as f64
    };
    Ok(RejectionDraws {
        draws,
        acceptance_rate,
    })
}

/// Ratio of the iMOM density to its Cauchy(0, √(τφ)) envelope.
pub fn imom_cauchy_ratio(theta: f64, tau_phi: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    let w = tau_phi / (theta * theta);
    PI.sqrt() * (1.0 + w) * (-w).exp()
}
