//! Leave-one-cell-out validation and random hyperparameter search.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::regressors::{BrrHyper, GprHyper, Hyperparameters, Model, ModelKind, TrainingSet};
use crate::rng::{derive_seed, substream};
use crate::uncertainty::rmspe;

/// Row indices of one grouped fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub held_out: String,
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
}

/// One fold per cell: train on every other cell's rows, validate on the
/// held-out cell's original (non-adversarial) rows.
pub fn leave_one_cell_out(fm: &FeatureMatrix) -> Result<Vec<Fold>> {
    let groups = fm.group_names();
    if groups.len() < 2 {
        return Err(Error::InvalidData(format!(
            "grouped cross-validation needs at least 2 cells, got {}",
            groups.len()
        )));
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let train = (0..fm.nrows()).filter(|&r| fm.groups[r] != g).collect();
            let validate = (0..fm.nrows()).filter(|&r| fm.groups[r] == g && !fm.adversarial[r]).collect();
            Fold { held_out: g, train, validate }
        })
        .collect())
}

/// Index of the smallest finite score, first occurrence on ties.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub hyperparameters: Hyperparameters,
    /// Mean leave-one-cell-out RMSPE (%); infinite when a fold failed.
    pub cv_rmspe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Hyperparameters,
    pub trials: Vec<Trial>,
}

/// Draws one sample from the search space of `kind`; `None` for kinds with a
/// fixed configuration.
pub fn sample_hyperparameters(kind: ModelKind, seed: u64, trial: usize) -> Option<Hyperparameters> {
    let mut rng = substream(seed, "search", trial as u64);
    match kind {
        ModelKind::Brr => Some(Hyperparameters::Brr(BrrHyper {
            alpha_1: rng.random_range(1e-6..1e-2),
            alpha_2: rng.random_range(1e-6..1e-2),
            lambda_1: rng.random_range(1e-6..1e-2),
            lambda_2: rng.random_range(1e-6..1e-2),
        })),
        ModelKind::Gpr => Some(Hyperparameters::Gpr(GprHyper {
            log_length_scale: rng.random_range(-2.0..2.0),
            log_signal_variance: rng.random_range(-3.0..1.0),
            log_noise_variance: rng.random_range(-6.0..-1.0),
        })),
        ModelKind::Rf | ModelKind::Dnne => None,
    }
}

/// Mean RMSPE over folds for one hyperparameter setting.
pub fn cv_score(fm: &FeatureMatrix, folds: &[Fold], hyper: &Hyperparameters, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for (k, fold) in folds.iter().enumerate() {
        let train = fm.select_rows(&fold.train);
        let valid = fm.select_rows(&fold.validate);
        let data = TrainingSet { x: &train.x, y: &train.y, groups: &train.groups };
        let model = Model::fit(hyper, data, derive_seed(seed, "fold", k as u64), Execution::Sequential)?;
        let mu = model.predict_mean(&valid.x, Execution::Sequential)?;
        total += rmspe(&mu, &valid.y)?;
    }
    Ok(total / folds.len() as f64)
}

/// Uniform random search scored by leave-one-cell-out RMSPE. Kinds without a
/// search space return their defaults and no trials.
pub fn random_search(
    kind: ModelKind,
    fm: &FeatureMatrix,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<SearchResult> {
    if trials == 0 {
        return Err(Error::Config("random search needs at least one trial".into()));
    }
    if sample_hyperparameters(kind, seed, 0).is_none() {
        return Ok(SearchResult { best: Hyperparameters::default_for(kind), trials: vec![] });
    }
    let folds = leave_one_cell_out(fm)?;
    let results: Vec<Trial> = exec.map_range(trials, |t| {
        let hyper = sample_hyperparameters(kind, seed, t).expect("kind has a search space");
        let cv_rmspe = match cv_score(fm, &folds, &hyper, derive_seed(seed, "trial", t as u64)) {
            Ok(s) => s,
            Err(e) => {
                log::debug!("trial {t} failed: {e}");
                f64::INFINITY
            }
        };
        Trial { hyperparameters: hyper, cv_rmspe }
    });
    let scores: Vec<f64> = results.iter().map(|t| t.cv_rmspe).collect();
    let best = select_best(&scores)
        .ok_or_else(|| Error::Numerical(format!("all {trials} {kind} search trials failed")))?;
    Ok(SearchResult { best: results[best].hyperparameters.clone(), trials: results })
}
