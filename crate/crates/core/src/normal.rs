//! Standard normal helpers with tail-accurate evaluation.
//!
//! Lower-tail quantities are evaluated through `erfc` so that both tails keep
//! full relative precision down to roughly `1e-300`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x), computed without cancellation.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Probability that a standard normal falls in `(lo, hi)`.
///
/// Picks the tail representation that avoids subtracting two numbers close
/// to one.
pub fn interval_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        (sf(lo) - sf(hi)).max(0.0)
    } else if hi <= 0.0 {
        (cdf(hi) - cdf(lo)).max(0.0)
    } else {
        (1.0 - cdf(lo) - sf(hi)).max(0.0)
    }
}

/// Φ⁻¹(p) for p in (0, 1).
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the accurate cdf, done on the smaller tail
    let (err, dens) = if x < 0.0 {
        (cdf(x) - p, (-0.5 * x * x - LN_SQRT_2PI).exp())
    } else {
        ((1.0 - p) - sf(x), (-0.5 * x * x - LN_SQRT_2PI).exp())
    };
    if dens != 0.0 && dens.is_finite() {
        let step = err / dens;
        if step.is_finite() && step.abs() < 1e-3 * (1.0 + x.abs()) {
            return x - step;
        }
    }
    x
}

/// log N(x; mean, var).
pub fn log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
}
