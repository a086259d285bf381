//! Battery state-of-health (SOH) estimation with calibrated uncertainty.
//!
//! The crate covers the whole offline/online flow:
//!
//! - [`data`]: cycle ingestion, SOH targets, RANSAC outlier filtering and
//!   dataset partitioning.
//! - [`segments`]: threshold-based extraction of the constant-current voltage
//!   and constant-voltage current charge segments.
//! - [`features`]: the engineered feature set computed from those segments and
//!   the cycle history.
//! - [`pipeline`]: feature selection, adversarial augmentation,
//!   standardization and hyperparameter search.
//! - [`regressors`]: Bayesian ridge, Gaussian process, random forest with
//!   infinitesimal-jackknife variance and a deep ensemble, all predicting a
//!   Gaussian per cycle.
//! - [`uncertainty`]: reliability curves, isotonic recalibration and the
//!   accuracy/uncertainty metrics.
//! - [`synthetic`]: a deterministic cell generator with known ground truth.
//! - [`workflow`]: the train/evaluate/predict orchestration used by the CLI.

pub mod config;
pub mod data;
pub mod defaults;
pub mod error;
pub mod exec;
pub mod features;
pub mod pipeline;
pub mod regressors;
pub mod rng;
pub mod segments;
pub mod synthetic;
pub mod uncertainty;
pub mod workflow;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
