//! Split-conformal hyperrectangular prediction regions for multi-target
//! regression.
//!
//! The two main procedures calibrate an initial box built from per-dimension
//! models so that the whole box covers a fresh response with probability at
//! least `1 - alpha`:
//!
//! * [`chr`] starts from point predictions and symmetric widths,
//! * [`cqhr`] starts from per-target conditional quantile estimates.
//!
//! [`baselines`] holds max-norm and Bonferroni competitors, [`simgen`] the
//! simulation scenarios and [`metrics`] the evaluation harness.

pub mod baselines;
pub mod chr;
pub mod cqhr;
pub mod data;
pub mod error;
pub mod method;
pub mod metrics;
pub mod models;
pub mod quantile;
pub mod region;
pub mod rng;
pub mod serde_float;
pub mod simgen;
pub mod split;

pub use data::{Matrix, MultiTargetDataset};
pub use error::{Error, Result};
pub use quantile::inflated_empirical_quantile;
pub use region::{Hyperrectangle, MiscoverageConfig};
