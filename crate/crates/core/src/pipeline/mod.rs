//! Offline pipeline stages: feature matrix handling, standardization,
//! adversarial augmentation, feature selection and hyperparameter search.

pub mod fgsm;
pub mod matrix;
pub mod search;
pub mod selection;

pub use fgsm::{fgsm_augment, fgsm_augment_with, RidgeModel};
pub use matrix::{FeatureMatrix, Standardizer};
pub use search::{leave_one_cell_out, random_search, select_best, Fold, SearchResult, Trial};
pub use selection::{rf_rfe_cv, SelectionResult, SelectionStep};
