//! Seeded random streams.
//!
//! Every stochastic routine takes a `u64` seed. Independent sub-streams are
//! obtained with [`derive_seed`], so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

pub type ChainRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Draw from IG(shape, scale) with density ∝ φ^{−shape−1} exp(−scale/φ).
///
/// Callers working with the IG(a/2, b/2) convention pass `a/2` and `b/2`.
pub fn inv_gamma<R: rand::Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("inverse-gamma parameters must be positive");
    1.0 / g.sample(rng)
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
