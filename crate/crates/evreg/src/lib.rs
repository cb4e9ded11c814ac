//! Extreme-value (Gumbel) regression with covariate-dependent location and
//! dispersion.
//!
//! The crate fits maximum- and minimum-extreme-value regression models by
//! maximum likelihood, computes five large-sample test statistics for point
//! hypotheses (likelihood ratio, Wald, score, gradient, and a second-order
//! adjusted likelihood ratio), inverts them into confidence intervals, and
//! runs the Monte Carlo size/power machinery used to compare them.
//!
//! Module layout:
//! - [`specfun`]: gamma-function derivatives, chi-square tail probabilities;
//! - [`formula`]: the small expression language for nonlinear predictors and
//!   its symbolic differentiation;
//! - [`model`]: model specification, per-observation design quantities,
//!   sampling, and the min/max reduction;
//! - [`likelihood`]: log-likelihood, analytic score, observed and expected
//!   information;
//! - [`skovgaard`]: the adjusted likelihood-ratio statistic and its coupling
//!   matrices;
//! - [`estimate`]: BFGS maximum-likelihood fitting with equality restrictions;
//! - [`inference`]: the five test statistics and confidence-interval
//!   inversion;
//! - [`montecarlo`]: reproducible size, power, critical-value, and quantile
//!   discrepancy studies.

pub mod error;
pub mod estimate;
pub mod formula;
pub mod inference;
pub mod likelihood;
mod linalg;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod skovgaard;
pub mod specfun;

pub use error::{Error, Result};
pub use estimate::{FitResult, Hypothesis};
pub use inference::{ConfidenceInterval, StatKind, TestReport};
pub use formula::{DerivBundle, PredictorExpr};
pub use likelihood::InfoMatrix;
pub use model::{DesignState, Family, Link, ModelConfig, ModelSpec, ObservationSet, Theta};
pub use montecarlo::{CovariateLaw, SimulationConfig, StudyKind, StudyOutput};
