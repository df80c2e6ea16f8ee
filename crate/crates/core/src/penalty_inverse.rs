//! Inverse of the piMOM log-penalty.
//!
//! With `z = θ²` the log-penalty is
//!
//! ```text
//! g(z) = ½(ln(τ τ_N) + 2 ln φ + ln 2) − ln z − τφ/z + z/(2 τ_N φ)
//! g'(z) = −1/z + τφ/z² + 1/(2 τ_N φ)
//! ```
//!
//! `g'` has real roots `τ_N φ (1 ± √(1 − 2τ/τ_N))` only when `τ_N > 2τ`; for
//! `τ_N ≤ 2τ` the curve is nondecreasing and has a unique inverse.
//! [`ImomPenaltyCurve::invert_g`] starts from the root of the approximation
//! that drops `ln z`, brackets by doubling/halving and refines by
//! Illinois-modified regula falsi on `ln z`.

use crate::error::{ensure_finite, ensure_positive, Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
const MAX_DOUBLINGS: usize = 200;
const MAX_REFINEMENTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImomPenaltyCurve {
    tau: f64,
    tau_n: f64,
    phi: f64,
    tolerance: f64,
    offset: f64,
}

/// Result of an inversion together with the refinement effort it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub z: f64,
    pub iterations: usize,
}

impl ImomPenaltyCurve {
    pub fn new(tau: f64, tau_n: f64, phi: f64) -> Result<Self> {
        Self::with_tolerance(tau, tau_n, phi, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(tau: f64, tau_n: f64, phi: f64, tolerance: f64) -> Result<Self> {
        ensure_positive("tau", tau)?;
        ensure_positive("tau_n", tau_n)?;
        ensure_positive("phi", phi)?;
        ensure_positive("tolerance", tolerance)?;
        if tau_n > 2.0 * tau * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "tau_n = {tau_n} > 2*tau = {}: g'(z) then has real roots and g is not monotone",
                2.0 * tau
            )));
        }
        let offset = 0.5 * ((tau * tau_n).ln() + 2.0 * phi.ln() + 2f64.ln());
        Ok(Self {
            tau,
            tau_n,
            phi,
            tolerance,
            offset,
        })
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn g_of_z(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if z.is_infinite() {
            return f64::INFINITY;
        }
        self.offset - z.ln() - self.tau * self.phi / z + z / (2.0 * self.tau_n * self.phi)
    }

    pub fn g_prime(&self, z: f64) -> f64 {
        -1.0 / z + self.tau * self.phi / (z * z) + 1.0 / (2.0 * self.tau_n * self.phi)
    }

    /// Root of `offset − τφ/z + z/(2τ_Nφ) = t`, always positive.
    fn initial_guess(&self, t: f64) -> f64 {
        let c = self.offset - t;
        let q = 2.0 * self.tau / self.tau_n;
        let disc = c * c + q;
        // −c + √(c² + q), written to avoid cancellation when c > 0
        let root = if c > 0.0 {
            q / (c + disc.sqrt())
        } else {
            -c + disc.sqrt()
        };
        let z0 = self.tau_n * self.phi * root;
        if z0.is_finite() && z0 > 0.0 {
            z0
        } else {
            self.tau_n * self.phi
        }
    }

    /// z₀ with |g(z₀) − t| ≤ tolerance.
    pub fn invert_g(&self, t: f64) -> Result<f64> {
        Ok(self.invert_g_counted(t)?.z)
    }

    pub fn invert_g_counted(&self, t: f64) -> Result<Inversion> {
        ensure_finite("t", t)?;
        let z0 = self.initial_guess(t);
        let g0 = self.g_of_z(z0) - t;
        if g0.abs() <= self.tolerance {
            return Ok(Inversion { z: z0, iterations: 0 });
        }
        // bracket in x = ln z
        let (mut xl, mut fl, mut xu, mut fu);
        if g0 < 0.0 {
            xl = z0.ln();
            fl = g0;
            xu = xl;
            fu = g0;
            let mut n = 0;
            while fu < 0.0 {
                if n == MAX_DOUBLINGS {
                    return Err(bracket_error(t, xu, fu + t));
                }
                xl = xu;
                fl = fu;
                xu += std::f64::consts::LN_2;
                fu = self.g_of_z(xu.exp()) - t;
                n += 1;
            }
        } else {
            xu = z0.ln();
            fu = g0;
            xl = xu;
            fl = g0;
            let mut n = 0;
            while fl > 0.0 {
                if n == MAX_DOUBLINGS {
                    return Err(bracket_error(t, xl, fl + t));
                }
                xu = xl;
                fu = fl;
                xl -= std::f64::consts::LN_2;
                fl = self.g_of_z(xl.exp()) - t;
                n += 1;
            }
        }
        if fl.abs() <= self.tolerance {
            return Ok(Inversion { z: xl.exp(), iterations: 0 });
        }
        if fu.abs() <= self.tolerance {
            return Ok(Inversion { z: xu.exp(), iterations: 0 });
        }
        // Illinois regula falsi
        let mut side = 0i8;
        for it in 1..=MAX_REFINEMENTS {
            let x = (xl * fu - xu * fl) / (fu - fl);
            let x = if x > xl && x < xu { x } else { 0.5 * (xl + xu) };
            let f = self.g_of_z(x.exp()) - t;
            if f.abs() <= self.tolerance || xu - xl <= 1e-15 * (1.0 + x.abs()) {
                return Ok(Inversion { z: x.exp(), iterations: it });
            }
            if f < 0.0 {
                xl = x;
                fl = f;
                if side == -1 {
                    fu *= 0.5;
                }
                side = -1;
            } else {
                xu = x;
                fu = f;
                if side == 1 {
                    fl *= 0.5;
                }
                side = 1;
            }
        }
        let x = 0.5 * (xl + xu);
        Ok(Inversion {
            z: x.exp(),
            iterations: MAX_REFINEMENTS,
        })
    }
}

fn bracket_error(target: f64, x: f64, g: f64) -> Error {
    Error::BracketNotFound {
        target,
        doublings: MAX_DOUBLINGS,
        last_z: x.exp(),
        last_g: g,
    }
}
