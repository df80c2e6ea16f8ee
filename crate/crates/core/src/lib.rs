//! Bayesian variable selection and model averaging under non-local priors.

pub mod bench;
pub mod bma;
pub mod cli;
pub(crate) mod conjugate;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod marglik;
pub mod modelsearch;
pub mod normal;
pub mod penalty_inverse;
pub mod priors;
pub mod quadrature;
pub mod rng;
pub mod samplers;
pub mod tmvn;
pub mod truncation;

pub use data::{Dataset, ModelIndicator};
pub use error::{Error, Result};
pub use priors::{Family, PriorSpec};
