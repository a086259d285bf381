//! Self-describing persisted model: a single JSON document holding the
//! model parameters and everything needed to reproduce its inputs.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dnne::Shape;
use super::tree::RegressionTree;
use super::{BayesianRidge, DeepEnsemble, GaussianProcess, GprHyper, Hyperparameters, Model, ModelKind, PredictiveDistribution, RandomForest};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::FeatureOptions;
use crate::pipeline::{FeatureMatrix, SelectionResult, Standardizer};
use crate::uncertainty::RecalibrationMap;

pub const FORMAT_VERSION: u32 = 1;

/// Row-major matrix with explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Array2 {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl Array2 {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Array2 { shape: [m.nrows(), m.ncols()], data: m.transpose().iter().copied().collect() }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let [r, c] = self.shape;
        if r * c != self.data.len() {
            return Err(Error::InvalidData(format!("array shape {r}×{c} does not match {} values", self.data.len())));
        }
        Ok(DMatrix::from_row_slice(r, c, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Brr(BayesianRidge),
    Gpr {
        hyper: GprHyper,
        x_train: Array2,
        weights: Vec<f64>,
        y_mean: f64,
        y_std: f64,
        jitter: f64,
    },
    Rf {
        n_train: usize,
        n_features: usize,
        seed: u64,
        importances: Vec<f64>,
        trees: Vec<RegressionTree>,
    },
    Dnne {
        shape: Shape,
        /// One row of flat parameters per member.
        members: Array2,
        clipped_targets: usize,
        final_losses: Vec<f64>,
    },
}

impl ModelParams {
    pub fn from_model(model: &Model) -> Self {
        match model {
            Model::Brr(m) => ModelParams::Brr(m.clone()),
            Model::Gpr(m) => ModelParams::Gpr {
                hyper: m.hyper,
                x_train: Array2::from_matrix(&m.x_train),
                weights: m.weights.clone(),
                y_mean: m.y_mean,
                y_std: m.y_std,
                jitter: m.jitter,
            },
            Model::Rf(m) => ModelParams::Rf {
                n_train: m.n_train,
                n_features: m.n_features,
                seed: m.seed,
                importances: m.importances.clone(),
                trees: m.trees.clone(),
            },
            Model::Dnne(m) => ModelParams::Dnne {
                shape: m.shape,
                members: Array2 {
                    shape: [m.members.len(), m.shape.param_count()],
                    data: m.members.concat(),
                },
                clipped_targets: m.clipped_targets,
                final_losses: m.final_losses.clone(),
            },
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        Ok(match self {
            ModelParams::Brr(m) => Model::Brr(m.clone()),
            ModelParams::Gpr { hyper, x_train, weights, y_mean, y_std, jitter } => Model::Gpr(
                GaussianProcess::from_parts(*hyper, x_train.to_matrix()?, weights.clone(), *y_mean, *y_std, *jitter)?,
            ),
            ModelParams::Rf { n_train, n_features, seed, importances, trees } => {
                Model::Rf(RandomForest::from_parts(trees.clone(), *n_train, *n_features, *seed, importances.clone()))
            }
            ModelParams::Dnne { shape, members, clipped_targets, final_losses } => {
                if members.shape[1] != shape.param_count() || members.shape[0] * members.shape[1] != members.data.len() {
                    return Err(Error::InvalidData("ensemble parameter array does not match network shape".into()));
                }
                Model::Dnne(DeepEnsemble {
                    shape: *shape,
                    members: members.data.chunks(members.shape[1]).map(<[f64]>::to_vec).collect(),
                    clipped_targets: *clipped_targets,
                    final_losses: final_losses.clone(),
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub kind: ModelKind,
    pub seed: u64,
    /// SHA-256 of the run configuration that produced the bundle.
    pub config_hash: String,
    pub hyperparameters: Hyperparameters,
    pub feature_options: FeatureOptions,
    /// Features every input cycle must provide.
    pub candidate_features: Vec<String>,
    pub selected_features: Vec<String>,
    pub selection: Option<SelectionResult>,
    /// Present for models trained on z-scored inputs.
    pub standardization: Option<Standardizer>,
    pub recalibration: RecalibrationMap,
    pub params: ModelParams,
}

impl ModelBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: ModelBundle = serde_json::from_str(s)?;
        if b.format_version != FORMAT_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported bundle format version {} (expected {FORMAT_VERSION})",
                b.format_version
            )));
        }
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidData(format!("cannot read bundle {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> Result<Model> {
        self.params.to_model()
    }

    /// Model inputs for raw feature rows: selected columns, z-scored when
    /// the model was trained that way.
    pub fn inputs(&self, fm: &FeatureMatrix) -> Result<DMatrix<f64>> {
        let sub = fm.select_columns(&self.selected_features)?;
        match &self.standardization {
            Some(s) => s.apply(&sub.x),
            None => Ok(sub.x),
        }
    }

    /// Predictions before recalibration.
    pub fn predict_raw(&self, model: &Model, fm: &FeatureMatrix, exec: Execution) -> Result<Vec<PredictiveDistribution>> {
        model.predict(&self.inputs(fm)?, exec)
    }

    pub fn predict(&self, model: &Model, fm: &FeatureMatrix, exec: Execution) -> Result<Vec<PredictiveDistribution>> {
        Ok(self.recalibration.apply_all(&self.predict_raw(model, fm, exec)?))
    }
}
