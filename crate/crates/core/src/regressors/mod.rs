//! Four probabilistic regressors behind one interface: each fits on a design
//! matrix (rows = cycles) and predicts a Gaussian per row.

pub mod brr;
pub mod bundle;
pub mod dnne;
pub mod forest;
pub mod gpr;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::uncertainty::normal;

pub use brr::{BayesianRidge, BrrHyper};
pub use bundle::{Array2, ModelBundle, ModelParams, FORMAT_VERSION};
pub use dnne::{hidden_sizes, DeepEnsemble, DnneHyper};
pub use forest::{RandomForest, RfHyper};
pub use gpr::{GaussianProcess, GprHyper};

/// Gaussian predictive distribution on the SOH ratio scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: f64,
    pub variance: f64,
}

impl PredictiveDistribution {
    pub fn new(mean: f64, variance: f64) -> Self {
        PredictiveDistribution { mean, variance }
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        normal::cdf((y - self.mean) / self.std())
    }

    /// Central 90% interval `μ ± Φ⁻¹(0.95)·σ`.
    pub fn interval90(&self) -> (f64, f64) {
        let h = normal::z90() * self.std();
        (self.mean - h, self.mean + h)
    }

    pub fn is_valid(&self) -> bool {
        self.mean.is_finite() && self.variance.is_finite() && self.variance > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Brr,
    Gpr,
    Rf,
    Dnne,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Brr, ModelKind::Gpr, ModelKind::Rf, ModelKind::Dnne];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Brr => "brr",
            ModelKind::Gpr => "gpr",
            ModelKind::Rf => "rf",
            ModelKind::Dnne => "dnne",
        }
    }

    /// The random forest consumes raw features; the rest are z-scored.
    pub fn uses_standardized_inputs(self) -> bool {
        self != ModelKind::Rf
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}` (expected brr, gpr, rf or dnne)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparameters {
    Brr(BrrHyper),
    Gpr(GprHyper),
    Rf(RfHyper),
    Dnne(DnneHyper),
}

impl Hyperparameters {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparameters::Brr(_) => ModelKind::Brr,
            Hyperparameters::Gpr(_) => ModelKind::Gpr,
            Hyperparameters::Rf(_) => ModelKind::Rf,
            Hyperparameters::Dnne(_) => ModelKind::Dnne,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Brr => Hyperparameters::Brr(BrrHyper::default()),
            ModelKind::Gpr => Hyperparameters::Gpr(GprHyper::default()),
            ModelKind::Rf => Hyperparameters::Rf(RfHyper::default()),
            ModelKind::Dnne => Hyperparameters::Dnne(DnneHyper::default()),
        }
    }
}

/// A fitted model of any kind.
#[derive(Debug, Clone)]
pub enum Model {
    Brr(BayesianRidge),
    Gpr(GaussianProcess),
    Rf(RandomForest),
    Dnne(DeepEnsemble),
}

/// Training rows with their cell labels (needed for per-cell batches).
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub groups: &'a [String],
}

impl Model {
    pub fn fit(hyper: &Hyperparameters, data: TrainingSet<'_>, seed: u64, exec: Execution) -> Result<Model> {
        check_training(data.x, data.y)?;
        Ok(match hyper {
            Hyperparameters::Brr(h) => Model::Brr(BayesianRidge::fit(data.x, data.y, h)?),
            Hyperparameters::Gpr(h) => Model::Gpr(GaussianProcess::fit(data.x, data.y, h)?),
            Hyperparameters::Rf(h) => Model::Rf(RandomForest::fit(data.x, data.y, h, seed, exec)?),
            Hyperparameters::Dnne(h) => Model::Dnne(DeepEnsemble::fit(data.x, data.y, data.groups, h, seed, exec)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Brr(_) => ModelKind::Brr,
            Model::Gpr(_) => ModelKind::Gpr,
            Model::Rf(_) => ModelKind::Rf,
            Model::Dnne(_) => ModelKind::Dnne,
        }
    }

    /// Predictive means only, for model selection.
    pub fn predict_mean(&self, x: &DMatrix<f64>, exec: Execution) -> Result<Vec<f64>> {
        let mu = match self {
            Model::Gpr(m) => m.predict_mean(x)?,
            Model::Rf(m) => m.predict_mean(x, exec)?,
            _ => self.predict(x, exec)?.iter().map(|p| p.mean).collect(),
        };
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("{} produced a non-finite mean", self.kind())));
        }
        Ok(mu)
    }

    pub fn predict(&self, x: &DMatrix<f64>, exec: Execution) -> Result<Vec<PredictiveDistribution>> {
        let preds = match self {
            Model::Brr(m) => m.predict(x)?,
            Model::Gpr(m) => m.predict(x)?,
            Model::Rf(m) => m.predict(x, exec)?,
            Model::Dnne(m) => m.predict(x)?,
        };
        if let Some(p) = preds.iter().find(|p| !p.is_valid()) {
            return Err(Error::Numerical(format!("{} produced invalid prediction {p:?}", self.kind())));
        }
        Ok(preds)
    }
}

pub(crate) fn check_training(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.ncols() == 0 {
        return Err(Error::InvalidData("empty feature set".into()));
    }
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::InvalidData(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite training input".into()));
    }
    Ok(())
}

pub(crate) fn check_inputs(x: &DMatrix<f64>, d: usize) -> Result<()> {
    if x.ncols() != d {
        return Err(Error::InvalidData(format!("expected {d} features, got {}", x.ncols())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite prediction input".into()));
    }
    Ok(())
}
