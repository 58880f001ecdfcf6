//! Latent Dirichlet allocation with covariates.
//!
//! Each instance's abundance of every cluster follows a negative-binomial
//! regression on the instance covariates; the categories inside a cluster
//! follow a multinomial with composition `phi_k`. Inference is a Gibbs
//! sampler: collapsed cluster assignments, Dirichlet draws of Φ and slice
//! sampling for the coefficients and the overdispersion. The default
//! estimator is two-stage: Φ and the latent abundances come from a
//! covariate-free LDA, the regression is then fitted on those abundances.

pub mod error;
pub mod analysis;
pub mod cli;
pub mod exec;
pub mod inference;
pub mod io;
pub mod model;
pub mod rng;
pub mod samplers;
pub mod simgen;
pub mod vanilla;

pub use error::{Error, Result};
pub use exec::Exec;
pub use rng::ChainRng;
