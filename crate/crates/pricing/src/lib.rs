//! Contextual pricing from posted-price transaction data.
//!
//! A seller logs `(features, offered price, sold?)` triples and wants a
//! pricing policy that maps features to prices. Because each transaction
//! reveals only whether the buyer's valuation exceeded the offered price,
//! revenue maximization is done through surrogate objectives:
//!
//! - [`losses`] defines convex surrogate losses (hinge-style, quantile,
//!   epsilon-insensitive) and non-convex reward estimators (model-free,
//!   kernel inverse-propensity weighting).
//! - [`solver`] minimizes empirical surrogate risk over linear policies by
//!   projected subgradient descent, and maximizes non-convex objectives by
//!   multistart pattern search.
//! - [`valuation`] models valuation distributions through their survival
//!   functions and computes optimal, hinge-optimal, and quantile-optimal
//!   prices.
//! - [`bounds`] computes worst-case revenue-ratio guarantees for the
//!   surrogate-optimal prices, the parameter settings that maximize those
//!   guarantees, and the extremal distributions that attain them.
//! - [`synthetic`] generates benchmark scenarios with known ground truth.
//! - [`policies`] implements demand-model baselines (direct method, kernel
//!   IPW), and revenue-based cross-validation of surrogate parameters.
//! - [`evaluation`] estimates expected revenue of a policy under the true
//!   or a fitted demand model.

pub mod bounds;
pub mod data;
pub mod evaluation;
pub mod losses;
pub mod numeric;
pub mod policies;
pub mod solver;
pub mod synthetic;
pub mod valuation;

pub use data::{Dataset, LinearPolicy, PropensityModel, Sample};
pub use losses::LossSpec;
pub use solver::{FitResult, SolverConfig};
