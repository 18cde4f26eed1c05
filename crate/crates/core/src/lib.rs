//! Stochastic multi-armed bandits over one-parameter canonical exponential
//! families.
//!
//! The crate is organized around six areas:
//!
//! - [`exp_family`]: the reward families (Bernoulli, Gaussian with known
//!   variance, Poisson, Exponential), their Kullback-Leibler divergences and
//!   the level-set inversion used by every UCB-type index.
//! - [`posterior`]: conjugate and grid representations of the posterior
//!   distribution on an arm mean, with quantile, tail, mean and sampling
//!   queries.
//! - [`policies`]: arm-selection strategies behind a uniform select/update
//!   interface (kl-UCB and its variants, Bayes-UCB, Thompson Sampling, MOSS,
//!   Lai's index, finite-horizon Gittins policies, the exact two-armed
//!   Bayes-optimal policy and a uniform-random baseline).
//! - [`gittins`]: finite-horizon Gittins indices for Beta posteriors via the
//!   calibration-game value recursion, and the exact Bayes-optimal dynamic
//!   program for two-armed Bernoulli bandits.
//! - [`bounds`]: asymptotic lower bounds (Lai-Robbins, Bayes-risk constants)
//!   and Monte Carlo validators for the deviation and posterior-tail
//!   inequalities the policies rely on.
//! - [`harness`]: a reproducible Monte Carlo experiment runner with CSV/JSON
//!   emission.

pub mod bounds;
pub mod error;
pub mod exp_family;
pub mod gittins;
pub mod harness;
pub mod numeric;
pub mod policies;
pub mod posterior;
pub mod rng;

pub use error::{Error, Result};
pub use exp_family::{ArmDistribution, BanditInstance, ExpFamily};
pub use policies::{Policy, PolicyConfig, PolicyKind, PolicyState};
pub use posterior::{Posterior, Prior};
