//! Certifiably optimal best subset selection for L2-regularized logistic
//! regression under cardinality and budget (knapsack) constraints.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: datasets, selection constraints, solver configuration and
//!   preprocessing transforms (min-max scaling, cubic spline expansion, CSV).
//! - [`logistic`]: stable softplus loss, gradients and a Newton solver for a
//!   fixed feature support.
//! - [`conic`]: the explicit mixed-integer conic program (exponential and
//!   rotated quadratic cones) and a CBF v3 reader/writer for cross-checking
//!   with external solvers.
//! - [`bnb`]: the exact branch-and-bound solver with perspective bounds.
//! - [`baselines`]: greedy univariable filters and exhaustive enumeration.
//! - [`datagen`]: hypercube-cluster synthetic prognostic datasets.
//! - [`eval`]: metrics, stratified folds, nested cross-validation and
//!   bootstrap confidence intervals.
//! - [`experiment`]: the cardinality and budget experiment suites.
//! - [`oracle`]: cross-checks of the solver against independent references.

pub mod baselines;
pub mod bnb;
pub mod conic;
pub mod data;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod logistic;
pub mod oracle;
mod rng;

pub use bnb::{solve, SolveResult, SolveStatus};
pub use data::{Dataset, FeatureClass, FitConfig, SelectionConstraint};
pub use error::{Error, Result};
pub use logistic::{ModelParams, Objective};
