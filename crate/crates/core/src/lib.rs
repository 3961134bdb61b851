//! Design-based estimation of finite-population totals under unequal-probability
//! sampling.
//!
//! The crate pairs the classical Horvitz-Thompson (HT) estimator with a
//! hard-threshold variant (IHT) that raises tiny first-order inclusion
//! probabilities to a common floor before inverse-probability weighting.
//! Alongside the point estimators it provides exact design moments, an
//! unbiased MSE estimator, brute-force enumeration oracles for small
//! populations, and a seeded Monte Carlo harness.
//!
//! Module map:
//!
//! - [`population`]: unit values, CSV I/O and the synthetic generators.
//! - [`designs`]: inclusion probabilities, samplers, joint probabilities.
//! - [`threshold`]: the probability floor and the choice of its rank `K`.
//! - [`estimators`]: HT / IHT totals, ratio estimators, MSE estimator.
//! - [`exact`]: analytic moments and exhaustive enumeration.
//! - [`montecarlo`]: replicated-sampling experiments and sweeps.
//! - [`cli`]: the `survht` command-line front end.

pub mod cli;
pub mod designs;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod montecarlo;
pub mod population;
pub mod rng;
pub mod sum;
pub mod threshold;

pub use designs::{DesignKind, InclusionProbs, Sample, SecondOrder};
pub use error::{Error, Result};
pub use estimators::{EstimateReport, EstimatorKind, Scale};
pub use exact::ExactMoments;
pub use montecarlo::{McConfig, McReport};
pub use population::Population;
pub use rng::Seed;
pub use threshold::ThresholdedProbs;
