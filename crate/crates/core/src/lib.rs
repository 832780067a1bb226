//! Flexible Gumbel (FG) distribution and inference.
//!
//! The FG family mixes a Gumbel-for-maximum and a Gumbel-for-minimum that
//! share their mode `theta`:
//!
//! ```text
//! f(y) = w * f_max(y; theta, sigma1) + (1 - w) * f_min(y; theta, sigma2)
//! ```
//!
//! This crate holds the pure numerics and builds with `#![no_std]` plus
//! `alloc`. File formats, the CLI and parallel drivers live in the `fgumbel`
//! companion crate.
//!
//! * [`dist`]: density, CDF, quantile, sampling and moments.
//! * [`ecm`]: maximum likelihood by expectation-conditional maximization,
//!   with sandwich standard errors from [`sandwich`].
//! * [`mcmc`]: data-augmented Metropolis-within-Gibbs sampler and
//!   [`diagnostics`] (split-Rhat, bulk ESS).
//! * [`regression`]: FG modal regression and the OLS baseline.
//! * [`normal_mix`], [`metrics`], [`reference`]: baselines and evaluation.
#![no_std]
// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod consts;
pub mod data;
pub mod diagnostics;
pub mod dist;
pub mod ecm;
mod error;
pub mod linalg;
pub mod mcmc;
pub mod metrics;
pub mod normal_mix;
pub mod optim;
pub mod reference;
pub mod regression;
pub mod sandwich;
#[cfg(feature = "serde")]
mod serde_float;
pub mod special;

pub use data::{DataSample, Source};
pub use dist::{FgParams, MomentSummary};
pub use ecm::{fit_ecm, EcmConfig, FitResult};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use mcmc::{run_mcmc, McmcConfig, PosteriorDraws, PriorSpec};
pub use normal_mix::{fit_normal_mixture_em, NormalMixFit, NormalMixParams};
pub use regression::{RegressionFit, RegressionSpec};

/// RNG used for every seeded operation. Streams are split per chain or
/// replicate with [`rng_stream`].
pub type Rng = rand_chacha::ChaCha8Rng;

/// Deterministic RNG for `(seed, stream)`.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
