//! Normal–inverse-gamma posterior algebra shared by samplers and marglik.
//!
//! Under `y ~ N(X_k θ, φI)`, `θ ~ N(0, κφI)`, `φ ~ IG(a/2, b/2)`:
//! `S = X_k'X_k + I/κ`, `m = S⁻¹X_k'y`, `R = y'y − m'Sm`, and
//! `θ | φ, y ~ N(m, φS⁻¹)`, `φ | y ~ IG((a+n)/2, (b+R)/2)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct ConjugateFit {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub s_chol: Cholesky<f64, Dyn>,
    pub mean: DVector<f64>,
    pub logdet_s: f64,
    pub resid: f64,
}

impl ConjugateFit {
    pub fn new(data: &Dataset, cols: &[usize], kappa: f64) -> Result<Self> {
        let gram = data.sub_gram(cols);
        let xty = data.sub_xty(cols);
        let mut s = gram.clone();
        for i in 0..cols.len() {
            s[(i, i)] += 1.0 / kappa;
        }
        let s_chol = s
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("X'X + I/tau".into()))?;
        let mean = s_chol.solve(&xty);
        let logdet_s = 2.0 * s_chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        // m'Sm = m'X'y
        let resid = (data.yty() - mean.dot(&xty)).max(0.0);
        Ok(Self {
            gram,
            xty,
            s_chol,
            mean,
            logdet_s,
            resid,
        })
    }

    /// Lower factor `L` with `L L' = S⁻¹`.
    pub fn cov_factor(&self) -> Result<DMatrix<f64>> {
        let inv = self.s_chol.inverse();
        let sym = (&inv + inv.transpose()) * 0.5;
        sym.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::NotPositiveDefinite("S^-1".into()))
    }

    pub fn cov_unit(&self) -> DMatrix<f64> {
        self.s_chol.inverse()
    }

    /// ‖y − X_kθ‖² from sufficient statistics.
    pub fn rss(&self, yty: f64, theta: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for (a, &ta) in theta.iter().enumerate() {
            lin += ta * self.xty[a];
            let row: f64 = theta.iter().enumerate().map(|(b, &tb)| self.gram[(a, b)] * tb).sum();
            quad += ta * row;
        }
        (yty - 2.0 * lin + quad).max(0.0)
    }
}
