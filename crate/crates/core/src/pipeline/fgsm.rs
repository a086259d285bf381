//! Fast-gradient-sign augmentation for regression.
//!
//! A ridge model on standardized features supplies the squared-error loss
//! gradient; each feature of each row is moved by `γ · range_j` in the
//! direction of the gradient sign. Targets are copied unchanged.

use nalgebra::{DMatrix, DVector};

use super::matrix::{FeatureMatrix, Standardizer};
use crate::defaults::FGSM_RIDGE_ALPHA;
use crate::error::{Error, Result};

/// Linear model `ŷ = intercept + w·z` on standardized inputs `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub standardizer: Standardizer,
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl RidgeModel {
    pub fn fit(fm: &FeatureMatrix, alpha: f64) -> Result<Self> {
        let standardizer = Standardizer::fit(&fm.x);
        let z = standardizer.apply(&fm.x)?;
        let n = fm.nrows() as f64;
        let y_mean = fm.y.iter().sum::<f64>() / n;
        let yc = DVector::from_iterator(fm.nrows(), fm.y.iter().map(|v| v - y_mean));
        let mut gram = z.transpose() * &z;
        for j in 0..gram.ncols() {
            gram[(j, j)] += alpha;
        }
        let z_mean = DVector::from_iterator(z.ncols(), z.column_iter().map(|c| c.sum() / n));
        let w = gram
            .cholesky()
            .ok_or_else(|| Error::Numerical("ridge normal equations not positive definite".into()))?
            .solve(&(z.transpose() * yc));
        Ok(RidgeModel { standardizer, intercept: y_mean - z_mean.dot(&w), weights: w.iter().copied().collect() })
    }

    /// Sign of `∂l/∂x_j = 2(ŷ − y) w_j / σ_j` for one raw row.
    pub fn gradient_signs(&self, x: &[f64], y: f64) -> Vec<f64> {
        let pred = self.intercept
            + x.iter()
                .enumerate()
                .map(|(j, v)| self.weights[j] * (v - self.standardizer.mean[j]) / self.standardizer.std[j])
                .sum::<f64>();
        self.weights.iter().map(|w| sign(2.0 * (pred - y) * w)).collect()
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Augments with a ridge model fitted on `fm` itself.
pub fn fgsm_augment(fm: &FeatureMatrix, gamma: f64) -> Result<FeatureMatrix> {
    let model = RidgeModel::fit(fm, FGSM_RIDGE_ALPHA)?;
    fgsm_augment_with(fm, gamma, &model)
}

/// Returns the original rows followed by one adversarial row per original.
pub fn fgsm_augment_with(fm: &FeatureMatrix, gamma: f64, model: &RidgeModel) -> Result<FeatureMatrix> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be a non-negative finite ratio, got {gamma}")));
    }
    let d = fm.ncols();
    let ranges: Vec<f64> = fm
        .x
        .column_iter()
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max) - c.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut adv = DMatrix::zeros(fm.nrows(), d);
    for r in 0..fm.nrows() {
        let row: Vec<f64> = fm.x.row(r).iter().copied().collect();
        let signs = model.gradient_signs(&row, fm.y[r]);
        for j in 0..d {
            let step = if ranges[j] > 0.0 { gamma * ranges[j] * signs[j] } else { 0.0 };
            adv[(r, j)] = row[j] + step;
        }
    }
    let mut copy = fm.clone();
    copy.x = adv;
    copy.adversarial = vec![true; fm.nrows()];
    let mut original = fm.clone();
    original.adversarial = vec![false; fm.nrows()];
    original.concat(&copy)
}
