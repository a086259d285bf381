//! Reliability curves, isotonic recalibration and the accuracy/uncertainty
//! metric suite.

pub mod calibration;
pub mod metrics;
pub mod normal;

pub use calibration::{pava, pit_curve, reliability, RecalibrationMap, ReliabilityCurve};
pub use metrics::{alpha_beta_pep, c_score, mape, rmspe, sharpness, MetricsReport};
