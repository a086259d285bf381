//! Recursive feature elimination driven by random-forest importances and
//! scored by leave-one-cell-out validation.

use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use super::search::leave_one_cell_out;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::regressors::{RandomForest, RfHyper};
use crate::rng::derive_seed;
use crate::uncertainty::rmspe;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub features: Vec<String>,
    /// Negative mean RMSPE (%) across folds.
    pub cv_score: f64,
    /// Feature removed after scoring this subset.
    pub eliminated: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<String>,
    pub steps: Vec<SelectionStep>,
}

impl SelectionResult {
    /// CV score per candidate subset size, largest subset first.
    pub fn scores(&self) -> Vec<(usize, f64)> {
        self.steps.iter().map(|s| (s.features.len(), s.cv_score)).collect()
    }
}

/// Index of the highest score; ties go to the later step (fewer features).
fn best_step(steps: &[SelectionStep]) -> usize {
    let mut best = 0;
    for (i, s) in steps.iter().enumerate() {
        if s.cv_score >= steps[best].cv_score {
            best = i;
        }
    }
    best
}

pub fn rf_rfe_cv(fm: &FeatureMatrix, forest_size: usize, seed: u64, exec: Execution) -> Result<SelectionResult> {
    if fm.ncols() == 0 {
        return Err(Error::InvalidData("feature selection on an empty feature set".into()));
    }
    let folds = leave_one_cell_out(fm)?;
    let hyper = RfHyper { trees: forest_size };
    let mut remaining = fm.columns.clone();
    let mut steps: Vec<SelectionStep> = Vec::new();
    loop {
        let sub = fm.select_columns(&remaining)?;
        let step = steps.len() as u64;
        let mut total = 0.0;
        for (k, fold) in folds.iter().enumerate() {
            let train = sub.select_rows(&fold.train);
            let valid = sub.select_rows(&fold.validate);
            let forest = RandomForest::fit(&train.x, &train.y, &hyper, derive_seed(seed, "rfe-fold", step * 1000 + k as u64), exec)?;
            total += rmspe(&forest.predict_mean(&valid.x, exec)?, &valid.y)?;
        }
        let cv_score = -total / folds.len() as f64;
        log::debug!("rfe: {} features, score {cv_score:.4}", remaining.len());
        if remaining.len() == 1 {
            steps.push(SelectionStep { features: remaining.clone(), cv_score, eliminated: None });
            break;
        }
        let forest = RandomForest::fit(&sub.x, &sub.y, &hyper, derive_seed(seed, "rfe-rank", step), exec)?;
        let weakest = (0..remaining.len())
            .min_by(|&a, &b| {
                forest.importances[a]
                    .total_cmp(&forest.importances[b])
                    .then_with(|| remaining[a].cmp(&remaining[b]))
            })
            .expect("at least two features remain");
        let name = remaining.remove(weakest);
        let mut features = remaining.clone();
        features.insert(weakest, name.clone());
        steps.push(SelectionStep { features, cv_score, eliminated: Some(name) });
    }
    let best = best_step(&steps);
    Ok(SelectionResult { selected: steps[best].features.clone(), steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(n: usize, score: f64) -> SelectionStep {
        SelectionStep { features: (0..n).map(|i| i.to_string()).collect(), cv_score: score, eliminated: None }
    }

    #[test]
    fn ties_prefer_fewer_features() {
        assert_eq!(best_step(&[step(3, -1.0), step(2, -0.5), step(1, -0.5)]), 2);
        assert_eq!(best_step(&[step(3, -0.1), step(2, -0.5), step(1, -0.5)]), 0);
    }
}
