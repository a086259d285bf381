//! Bagged regression forest with infinitesimal-jackknife variance.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tree::{bootstrap, RegressionTree};
use super::{check_inputs, check_training, PredictiveDistribution};
use crate::defaults::MODEL_FOREST_TREES;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::substream;

/// Lower bound on the bias-corrected IJ variance.
pub const IJ_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfHyper {
    pub trees: usize,
}

impl Default for RfHyper {
    fn default() -> Self {
        RfHyper { trees: MODEL_FOREST_TREES }
    }
}

/// Features tried per split: `ceil(d/3)`.
pub fn mtry(d: usize) -> usize {
    d.div_ceil(3).max(1)
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
    pub n_train: usize,
    pub n_features: usize,
    pub seed: u64,
    /// Mean impurity decrease per feature, summing to 1 (or all zero).
    pub importances: Vec<f64>,
    /// Bootstrap counts minus their per-sample mean across trees, n×B
    /// row-major. Built on the first variance request.
    centered_inbag: OnceLock<Vec<f64>>,
}

fn tree_stream(seed: u64, b: usize) -> crate::rng::Rng {
    substream(seed, "tree", b as u64)
}

/// Bootstrap counts of tree `b`, regenerated from the seed.
pub fn inbag_counts(seed: u64, b: usize, n: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for i in bootstrap(n, &mut tree_stream(seed, b)) {
        counts[i] += 1.0;
    }
    counts
}

fn center_inbag(seed: u64, trees: usize, n: usize) -> Vec<f64> {
    let counts: Vec<Vec<f64>> = (0..trees).map(|b| inbag_counts(seed, b, n)).collect();
    let mut m = Vec::with_capacity(n * trees);
    for i in 0..n {
        let mean = counts.iter().map(|c| c[i]).sum::<f64>() / trees as f64;
        m.extend(counts.iter().map(|c| c[i] - mean));
    }
    m
}

impl RandomForest {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], hyper: &RfHyper, seed: u64, exec: Execution) -> Result<Self> {
        check_training(x, y)?;
        if hyper.trees < 2 {
            return Err(Error::Config(format!("forest needs at least 2 trees for IJ variance, got {}", hyper.trees)));
        }
        let (n, d) = (x.nrows(), x.ncols());
        let m = mtry(d);
        let fitted = exec.map_range(hyper.trees, |b| {
            let mut rng = tree_stream(seed, b);
            let samples = bootstrap(n, &mut rng);
            let mut imp = vec![0.0; d];
            let tree = RegressionTree::fit(x, y, samples, m, &mut rng, &mut imp);
            (tree, imp)
        });
        let mut importances = vec![0.0; d];
        let mut trees = Vec::with_capacity(hyper.trees);
        for (tree, imp) in fitted {
            let total: f64 = imp.iter().sum();
            if total > 0.0 {
                for (acc, v) in importances.iter_mut().zip(&imp) {
                    *acc += v / total;
                }
            }
            trees.push(tree);
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        }
        Ok(RandomForest { centered_inbag: OnceLock::new(), trees, n_train: n, n_features: d, seed, importances })
    }

    pub fn from_parts(trees: Vec<RegressionTree>, n_train: usize, n_features: usize, seed: u64, importances: Vec<f64>) -> Self {
        RandomForest { centered_inbag: OnceLock::new(), trees, n_train, n_features, seed, importances }
    }

    /// Per-tree predictions, rows × B.
    pub fn tree_predictions(&self, x: &DMatrix<f64>, exec: Execution) -> DMatrix<f64> {
        let rows = exec.map_range(x.nrows(), |r| self.trees.iter().map(|t| t.predict_row(x, r)).collect::<Vec<_>>());
        DMatrix::from_fn(x.nrows(), self.trees.len(), |r, b| rows[r][b])
    }

    /// Mean tree prediction only.
    pub fn predict_mean(&self, x: &DMatrix<f64>, exec: Execution) -> Result<Vec<f64>> {
        check_inputs(x, self.n_features)?;
        let b = self.trees.len() as f64;
        Ok(exec.map_range(x.nrows(), |r| self.trees.iter().map(|t| t.predict_row(x, r)).sum::<f64>() / b))
    }

    /// Bias-corrected IJ variance before flooring, one per row of `preds`:
    /// `sum_i cov_i^2 - n/B^2 * sum_b (t_b - mean t)^2`.
    pub fn ij_variance_raw(&self, preds: &DMatrix<f64>, exec: Execution) -> Vec<f64> {
        let (bt, n) = (self.trees.len(), self.n_train);
        let inbag = self.centered_inbag.get_or_init(|| center_inbag(self.seed, bt, n));
        exec.map_range(preds.nrows(), |r| {
            let t: Vec<f64> = (0..bt).map(|b| preds[(r, b)]).collect();
            let mean = t.iter().sum::<f64>() / bt as f64;
            let dev: Vec<f64> = t.iter().map(|v| v - mean).collect();
            let mut total = 0.0;
            for i in 0..n {
                let row = &inbag[i * bt..(i + 1) * bt];
                let mut cov = 0.0;
                for b in 0..bt {
                    cov += row[b] * dev[b];
                }
                cov /= bt as f64;
                total += cov * cov;
            }
            let spread: f64 = dev.iter().map(|d| d * d).sum();
            total - n as f64 / (bt * bt) as f64 * spread
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>, exec: Execution) -> Result<Vec<PredictiveDistribution>> {
        check_inputs(x, self.n_features)?;
        let preds = self.tree_predictions(x, exec);
        let var = self.ij_variance_raw(&preds, exec);
        let b = self.trees.len() as f64;
        Ok(preds
            .row_iter()
            .zip(var)
            .map(|(r, v)| PredictiveDistribution::new(r.sum() / b, v.max(IJ_FLOOR)))
            .collect())
    }
}
