//! Multivariate Normal sampling outside a rectangle.
//!
//! Target: N(μ, Σ) restricted to `T = {θ : θᵢ < lᵢ or θᵢ > uᵢ for all i}`.
//! With `Σ = D D'` (lower Cholesky) and `Z = D⁻¹θ ~ N(D⁻¹μ, I)`, each `Zᵢ`
//! given the rest is a unit-variance Normal with a union of excluded
//! intervals, one per row `j` of `D` with `d_ji ≠ 0`. The union is merged
//! into disjoint pieces and sampled exactly by inverse cdf on the kept
//! pieces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::normal;
use crate::rng::{open_unit, rng_from_seed};

/// Kept probability below which a univariate conditional is declared infeasible.
pub const INFEASIBLE_MASS: f64 = 1e-12;

/// Exclusion box `(lᵢ, uᵢ)` per coordinate. `lᵢ = uᵢ` means no exclusion.
/// Half-infinite exclusions may use `±f64::INFINITY` or `±1e308`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRectangle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl OuterRectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InvalidArgument(format!(
                    "exclusion interval {i} is ({l}, {u}); need l <= u"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Exclude `(−tᵢ, tᵢ)` for every coordinate.
    pub fn symmetric(half_widths: &[f64]) -> Self {
        Self {
            lower: half_widths.iter().map(|t| -t.abs()).collect(),
            upper: half_widths.iter().map(|t| t.abs()).collect(),
        }
    }

    pub fn unrestricted(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Membership in the closure of `T`.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&t, (&l, &u))| l >= u || t <= l || t >= u)
    }
}

/// Sorted, pairwise-disjoint open intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisjointIntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl DisjointIntervalUnion {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        // first interval whose right end exceeds x
        let idx = self.intervals.partition_point(|&(_, b)| b <= x);
        idx < self.intervals.len() && self.intervals[idx].0 < x
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Sort and merge in place. Empty intervals are dropped; touching intervals
/// (`b_j = a_{j+1}`) are merged.
fn merge_in_place(buf: &mut Vec<(f64, f64)>) {
    buf.retain(|&(a, b)| b > a);
    if buf.len() < 2 {
        return;
    }
    buf.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut k = 0;
    for j in 1..buf.len() {
        let (a, b) = buf[j];
        if a > buf[k].1 {
            k += 1;
            buf[k] = (a, b);
        } else if b > buf[k].1 {
            buf[k].1 = b;
        }
    }
    buf.truncate(k + 1);
}

pub fn merge_intervals(intervals: &[(f64, f64)]) -> DisjointIntervalUnion {
    let mut buf = intervals.to_vec();
    merge_in_place(&mut buf);
    DisjointIntervalUnion { intervals: buf }
}

/// Inverse-cdf draw of a standard Normal restricted to `(lo, hi)`.
pub(crate) fn std_normal_in_piece<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    let u = open_unit(rng);
    let x = if lo >= 0.0 {
        let (s_lo, s_hi) = (normal::sf(lo), normal::sf(hi));
        -normal::quantile(s_lo - u * (s_lo - s_hi))
    } else {
        let (c_lo, c_hi) = (normal::cdf(lo), normal::cdf(hi));
        normal::quantile(c_lo + u * (c_hi - c_lo))
    };
    x.clamp(lo, hi)
}

/// Draw from N(mean, 1) outside the given disjoint sorted intervals.
fn unit_normal_excluding<R: Rng + ?Sized>(
    mean: f64,
    excluded: &[(f64, f64)],
    pieces: &mut Vec<(f64, f64, f64)>,
    rng: &mut R,
) -> Result<f64> {
    if excluded.is_empty() {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        return Ok(mean + z);
    }
    pieces.clear();
    let mut left = f64::NEG_INFINITY;
    let mut total = 0.0;
    for &(a, b) in excluded {
        let (lo, hi) = (left, a - mean);
        let m = normal::interval_mass(lo, hi);
        total += m;
        pieces.push((lo, hi, m));
        left = b - mean;
    }
    let m = normal::interval_mass(left, f64::INFINITY);
    total += m;
    pieces.push((left, f64::INFINITY, m));
    if total.is_nan() || total < INFEASIBLE_MASS {
        return Err(Error::InfeasibleRegion {
            kept_probability: total,
        });
    }
    let mut target = rng.random::<f64>() * total;
    let mut chosen = pieces.len() - 1;
    for (idx, &(_, _, m)) in pieces.iter().enumerate() {
        if m > 0.0 && target < m {
            chosen = idx;
            break;
        }
        target -= m;
    }
    // guard against round-off landing on an empty trailing piece
    while pieces[chosen].2 == 0.0 {
        chosen -= 1;
    }
    let (lo, hi, _) = pieces[chosen];
    Ok(mean + std_normal_in_piece(lo, hi, rng))
}

/// Exact draw from N(mean, sd²) restricted to the complement of `exclusion`.
pub fn sample_truncated_univariate_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    exclusion: &DisjointIntervalUnion,
    rng: &mut R,
) -> Result<f64> {
    if sd <= 0.0 || !sd.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite mean and positive sd, got ({mean}, {sd})"
        )));
    }
    let scaled: Vec<(f64, f64)> = exclusion
        .intervals
        .iter()
        .map(|&(a, b)| (a / sd, b / sd))
        .collect();
    let mut pieces = Vec::with_capacity(scaled.len() + 1);
    Ok(sd * unit_normal_excluding(mean / sd, &scaled, &mut pieces, rng)?)
}

/// One Gibbs sweep kernel over whitened coordinates, reusable across
/// iterations whose covariance is `scale² · L L'` and whose region changes.
#[derive(Debug, Clone)]
pub(crate) struct OuterGibbsKernel {
    chol: DMatrix<f64>,
    alpha_unit: DVector<f64>,
    z: Vec<f64>,
    intervals: Vec<(f64, f64)>,
    pieces: Vec<(f64, f64, f64)>,
}

impl OuterGibbsKernel {
    /// `chol` is the lower Cholesky factor of the covariance at unit scale.
    pub(crate) fn new(mean: &DVector<f64>, chol: DMatrix<f64>) -> Self {
        let alpha_unit = chol
            .solve_lower_triangular(mean)
            .expect("Cholesky factor has a positive diagonal");
        let k = mean.len();
        Self {
            chol,
            alpha_unit,
            z: vec![0.0; k],
            intervals: Vec::with_capacity(k),
            pieces: Vec::with_capacity(k + 1),
        }
    }

    /// Update `theta` in place with one sweep. Returns how many coordinates
    /// fell back to a boundary point because their conditional was infeasible.
    pub(crate) fn sweep<R: Rng + ?Sized>(
        &mut self,
        scale: f64,
        theta: &mut [f64],
        lower: &[f64],
        upper: &[f64],
        rng: &mut R,
    ) -> usize {
        let k = theta.len();
        let l = &self.chol;
        // Z = D⁻¹θ with D = scale·L
        for i in 0..k {
            let mut acc = theta[i];
            for j in 0..i {
                acc -= l[(i, j)] * scale * self.z[j];
            }
            self.z[i] = acc / (l[(i, i)] * scale);
        }
        let mut fallbacks = 0;
        for i in 0..k {
            let zi = self.z[i];
            self.intervals.clear();
            for j in i..k {
                let d = scale * l[(j, i)];
                if d == 0.0 || lower[j] >= upper[j] {
                    continue;
                }
                let rest = theta[j] - d * zi;
                let a = (lower[j] - rest) / d;
                let b = (upper[j] - rest) / d;
                self.intervals.push(if d > 0.0 { (a, b) } else { (b, a) });
            }
            merge_in_place(&mut self.intervals);
            let alpha = self.alpha_unit[i] / scale;
            let new_z =
                match unit_normal_excluding(alpha, &self.intervals, &mut self.pieces, rng) {
                    Ok(z) => z,
                    Err(_) => {
                        fallbacks += 1;
                        nearest_kept_boundary(alpha, &self.intervals)
                    }
                };
            let delta = new_z - zi;
            if delta != 0.0 {
                for j in i..k {
                    theta[j] += scale * l[(j, i)] * delta;
                }
            }
            self.z[i] = new_z;
        }
        fallbacks
    }
}

fn nearest_kept_boundary(x: f64, excluded: &[(f64, f64)]) -> f64 {
    for &(a, b) in excluded {
        if a < x && x < b {
            let nudge = |v: f64| 1e-12 * (1.0 + v.abs());
            return if x - a <= b - x && a.is_finite() {
                a - nudge(a)
            } else if b.is_finite() {
                b + nudge(b)
            } else {
                a - nudge(a)
            };
        }
    }
    x
}

/// Draws from a Gibbs chain targeting N(μ, Σ)·I(θ ∈ T).
#[derive(Debug, Clone)]
pub struct TmvnDraws {
    /// `n_draws × p`, post burn-in.
    pub draws: DMatrix<f64>,
    /// Coordinates resolved by the boundary fallback.
    pub fallbacks: usize,
}

pub fn gibbs_tmvn_outer(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    region: &OuterRectangle,
    n_draws: usize,
    burn: usize,
    seed: u64,
) -> Result<TmvnDraws> {
    let p = mu.len();
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: sigma.nrows(),
        });
    }
    if region.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: region.dim(),
        });
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("covariance".into()))?
        .l();
    let mut kernel = OuterGibbsKernel::new(mu, chol);
    let mut theta: Vec<f64> = mu.iter().copied().collect();
    for (i, t) in theta.iter_mut().enumerate() {
        let (l, u) = (region.lower[i], region.upper[i]);
        if l < u && *t > l && *t < u {
            let eps = 1e-9 * (1.0 + l.abs().max(u.abs()).min(1e300));
            *t = if *t - l <= u - *t && l.is_finite() {
                l - eps
            } else {
                u + eps
            };
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut draws = DMatrix::zeros(n_draws, p);
    let mut fallbacks = 0;
    for it in 0..burn + n_draws {
        fallbacks += kernel.sweep(1.0, &mut theta, &region.lower, &region.upper, &mut rng);
        if it >= burn {
            let row = it - burn;
            for j in 0..p {
                draws[(row, j)] = theta[j];
            }
        }
    }
    Ok(TmvnDraws { draws, fallbacks })
}
