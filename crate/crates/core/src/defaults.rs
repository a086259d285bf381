//! Pipeline constants used as configuration defaults.

/// Voltage window below the cut-off voltage used for the CC segment.
pub const DELTA_V: f64 = 0.3;
/// Lower CV current threshold as a fraction of the charge current (a 40% drop).
pub const I_LOW_FRACTION: f64 = 0.6;
/// Trees in the forest that drives recursive feature elimination.
pub const SELECTION_FOREST_TREES: usize = 700;
/// Trees in the random-forest regressor.
pub const MODEL_FOREST_TREES: usize = 1500;
/// FGSM step as a fraction of each feature's range.
pub const FGSM_GAMMA: f64 = 0.01;
/// Ridge penalty of the linear model that supplies FGSM gradients.
pub const FGSM_RIDGE_ALPHA: f64 = 1.0;
/// Half-width of the accuracy zone as a fraction of the true SOH.
pub const ALPHA_ZONE: f64 = 0.015;
/// Adam learning rate for the deep ensemble.
pub const ADAM_LEARNING_RATE: f64 = 0.001;
pub const ENSEMBLE_MEMBERS: usize = 5;
pub const ENSEMBLE_EPOCHS: usize = 200;
pub const SEARCH_TRIALS: usize = 50;
pub const RELIABILITY_LEVELS: usize = 20;
/// Points on the reference line used by the curve-distance features.
pub const REFERENCE_LINE_POINTS: usize = 32;
/// Histogram bins for the Shannon entropy feature.
pub const SHANNON_BINS: usize = 32;
