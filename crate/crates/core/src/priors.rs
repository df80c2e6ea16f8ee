//! Non-local prior densities and their penalty factorization.
//!
//! Each family is written as `penalty × local kernel`, coordinate by
//! coordinate:
//!
//! | family | local kernel           | penalty d(θᵢ, φ)                               |
//! |--------|------------------------|------------------------------------------------|
//! | pMOM   | N(θᵢ; 0, τφ)           | θᵢ^{2r} / ((2r−1)!! (τφ)^r)                    |
//! | piMOM  | N(θᵢ; 0, τ_N φ)        | iMOM(θᵢ) / N(θᵢ; 0, τ_N φ)                     |
//! | peMOM  | N(θᵢ; 0, τφ)           | exp(√2 − τφ/θᵢ²)                               |
//!
//! The residual variance prior is φ ~ IG(a_φ/2, b_φ/2), with density
//! ∝ φ^{−a_φ/2−1} exp(−b_φ/(2φ)).

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::normal;
use crate::quadrature::Quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pmom,
    Pimom,
    Pemom,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Pmom, Family::Pimom, Family::Pemom];

    pub fn name(self) -> &'static str {
        match self {
            Family::Pmom => "pmom",
            Family::Pimom => "pimom",
            Family::Pemom => "pemom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pmom" | "mom" => Ok(Family::Pmom),
            "pimom" | "imom" => Ok(Family::Pimom),
            "pemom" | "emom" => Ok(Family::Pemom),
            other => Err(Error::InvalidArgument(format!("unknown prior family '{other}'"))),
        }
    }
}

/// Default dispersion τ, chosen so that P(|θᵢ|/√φ < 0.2) = 0.01.
pub fn default_tau(family: Family) -> f64 {
    match family {
        Family::Pmom => 0.358,
        Family::Pimom => 0.133,
        Family::Pemom => 0.119,
    }
}

pub const DEFAULT_A_PHI: f64 = 0.01;
pub const DEFAULT_B_PHI: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: Family,
    pub tau: f64,
    /// pMOM power; only r = 1 is supported by the samplers.
    pub r: u32,
    /// Dispersion of the Normal envelope used by piMOM.
    pub tau_n: f64,
    pub a_phi: f64,
    pub b_phi: f64,
}

impl PriorSpec {
    pub fn new(family: Family, tau: f64) -> Result<Self> {
        let spec = Self {
            family,
            tau,
            r: 1,
            tau_n: 2.0 * tau,
            a_phi: DEFAULT_A_PHI,
            b_phi: DEFAULT_B_PHI,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn default_for(family: Family) -> Self {
        Self::new(family, default_tau(family)).expect("defaults are valid")
    }

    pub fn with_r(mut self, r: u32) -> Result<Self> {
        self.r = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tau_n(mut self, tau_n: f64) -> Result<Self> {
        self.tau_n = tau_n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_phi_prior(mut self, a_phi: f64, b_phi: f64) -> Result<Self> {
        self.a_phi = a_phi;
        self.b_phi = b_phi;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("tau", self.tau)?;
        ensure_positive("a_phi", self.a_phi)?;
        ensure_positive("b_phi", self.b_phi)?;
        ensure_positive("tau_n", self.tau_n)?;
        if self.r == 0 {
            return Err(Error::InvalidArgument("pMOM power r must be at least 1".into()));
        }
        if self.family == Family::Pimom && self.tau_n > 2.0 * self.tau * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "tau_n = {} exceeds 2*tau = {}: the iMOM log-penalty derivative has real roots \
                 tau_n*phi*(1 +/- sqrt(1 - 2*tau/tau_n)) once tau_n > 2*tau, so the penalty is \
                 not monotone in theta^2 and cannot be inverted (a 'tau_n >= 2*tau' condition is \
                 the reverse of what the root analysis gives)",
                self.tau_n,
                2.0 * self.tau
            )));
        }
        Ok(())
    }

    /// Variance of the local Normal kernel per unit φ.
    pub fn kernel_dispersion(&self) -> f64 {
        match self.family {
            Family::Pimom => self.tau_n,
            Family::Pmom | Family::Pemom => self.tau,
        }
    }
}

/// ln (2r−1)!!
pub(crate) fn ln_odd_double_factorial(r: u32) -> f64 {
    (1..=r).map(|k| ((2 * k - 1) as f64).ln()).sum()
}

/// Univariate log density; no input validation.
pub(crate) fn log_density_1d(spec: &PriorSpec, theta: f64, phi: f64) -> f64 {
    if theta == 0.0 {
        return f64::NEG_INFINITY;
    }
    let tp = spec.tau * phi;
    let t2 = theta * theta;
    match spec.family {
        Family::Pmom => {
            let r = spec.r as f64;
            r * t2.ln() - ln_odd_double_factorial(spec.r) - r * tp.ln()
                + normal::log_pdf(theta, 0.0, tp)
        }
        Family::Pimom => 0.5 * tp.ln() - 0.5 * PI.ln() - t2.ln() - tp / t2,
        Family::Pemom => SQRT_2 - tp / t2 + normal::log_pdf(theta, 0.0, tp),
    }
}

/// ln d(θᵢ, φ); −∞ at θᵢ = 0.
pub fn log_penalty(spec: &PriorSpec, theta: f64, phi: f64) -> f64 {
    if theta == 0.0 {
        return f64::NEG_INFINITY;
    }
    let tp = spec.tau * phi;
    let t2 = theta * theta;
    match spec.family {
        Family::Pmom => {
            let r = spec.r as f64;
            r * t2.ln() - ln_odd_double_factorial(spec.r) - r * tp.ln()
        }
        Family::Pimom => {
            0.5 * ((spec.tau * spec.tau_n).ln() + 2.0 * phi.ln() + 2f64.ln()) - t2.ln() - tp / t2
                + t2 / (2.0 * spec.tau_n * phi)
        }
        Family::Pemom => SQRT_2 - tp / t2,
    }
}

/// ln of the local Normal kernel matching [`log_penalty`].
pub fn log_local_kernel(spec: &PriorSpec, theta: f64, phi: f64) -> f64 {
    normal::log_pdf(theta, 0.0, spec.kernel_dispersion() * phi)
}

pub fn penalty_d(spec: &PriorSpec, theta_i: f64, phi: f64) -> Result<f64> {
    ensure_finite("theta_i", theta_i)?;
    ensure_positive("phi", phi)?;
    Ok(log_penalty(spec, theta_i, phi).exp())
}

/// Log of the product prior density of `theta` given φ.
pub fn log_density(spec: &PriorSpec, theta: &[f64], phi: f64) -> Result<f64> {
    ensure_positive("phi", phi)?;
    for &t in theta {
        ensure_finite("theta", t)?;
    }
    Ok(theta.iter().map(|&t| log_density_1d(spec, t, phi)).sum())
}

fn univariate_quadrature() -> Quadrature {
    Quadrature {
        abs_tol: 1e-10,
        rel_tol: 1e-12,
        max_subdivisions: 4000,
    }
}

/// ∫ π(θ | φ) dθ over ℝ for the univariate marginal.
pub fn density_mass(spec: &PriorSpec, phi: f64) -> Result<f64> {
    ensure_positive("phi", phi)?;
    let scale = (spec.tau * phi).sqrt();
    let half = univariate_quadrature()
        .integrate_to_infinity(|t| log_density_1d(spec, t, phi).exp(), 0.0, scale)?;
    Ok(2.0 * half.value)
}

/// P(|θᵢ|/√φ < t) under the univariate prior marginal.
pub fn prob_below_threshold(spec: &PriorSpec, t: f64, phi: f64) -> Result<f64> {
    ensure_positive("phi", phi)?;
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {t}")));
    }
    if t.is_infinite() {
        return density_mass(spec, phi);
    }
    let upper = t * phi.sqrt();
    let half = univariate_quadrature().integrate(|x| log_density_1d(spec, x, phi).exp(), 0.0, upper)?;
    Ok((2.0 * half.value).min(1.0))
}
