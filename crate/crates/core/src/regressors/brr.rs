//! Bayesian ridge regression with evidence maximization of the weight and
//! noise precisions under gamma hyperpriors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{check_inputs, check_training, PredictiveDistribution};
use crate::error::{Error, Result};

const MAX_ITER: usize = 300;
const TOL: f64 = 1e-6;

/// Gamma hyperprior shape/rate for the noise precision (`alpha_*`) and the
/// weight precision (`lambda_*`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrrHyper {
    pub alpha_1: f64,
    pub alpha_2: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
}

impl Default for BrrHyper {
    fn default() -> Self {
        BrrHyper { alpha_1: 1e-6, alpha_2: 1e-6, lambda_1: 1e-6, lambda_2: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianRidge {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub x_offset: Vec<f64>,
    /// Noise precision.
    pub alpha: f64,
    /// Weight precision.
    pub lambda: f64,
    /// Posterior weight covariance, row-major d×d.
    pub sigma: Vec<f64>,
    pub iterations: usize,
}

struct Centered {
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_offset: DVector<f64>,
    y_offset: f64,
}

fn center(x: &DMatrix<f64>, y: &[f64]) -> Centered {
    let n = x.nrows() as f64;
    let x_offset = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let y_offset = y.iter().sum::<f64>() / n;
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_offset[j]);
    }
    Centered { x: xc, y: DVector::from_iterator(y.len(), y.iter().map(|v| v - y_offset)), x_offset, y_offset }
}

impl BayesianRidge {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], hyper: &BrrHyper) -> Result<Self> {
        check_training(x, y)?;
        let c = center(x, y);
        let n = x.nrows() as f64;
        let gram = c.x.transpose() * &c.x;
        let xty = c.x.transpose() * &c.y;
        let eig = SymmetricEigen::new(gram);
        let evals: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(0.0)).collect();
        let q = &eig.eigenvectors;
        let qt_xty = q.transpose() * &xty;

        let var_y = c.y.norm_squared() / n;
        let mut alpha = 1.0 / (var_y + f64::EPSILON);
        let mut lambda = 1.0;
        let coef_for = |alpha: f64, lambda: f64| -> DVector<f64> {
            let scaled =
                DVector::from_iterator(evals.len(), (0..evals.len()).map(|i| alpha * qt_xty[i] / (lambda + alpha * evals[i])));
            q * scaled
        };
        let mut iterations = 0;
        for it in 1..=MAX_ITER {
            iterations = it;
            let coef = coef_for(alpha, lambda);
            let resid = (&c.y - &c.x * &coef).norm_squared();
            let gamma: f64 = evals.iter().map(|&e| alpha * e / (lambda + alpha * e)).sum();
            let new_lambda = (gamma + 2.0 * hyper.lambda_1) / (coef.norm_squared() + 2.0 * hyper.lambda_2);
            let new_alpha = (n - gamma + 2.0 * hyper.alpha_1) / (resid + 2.0 * hyper.alpha_2);
            if !new_alpha.is_finite() || !new_lambda.is_finite() || new_alpha <= 0.0 || new_lambda <= 0.0 {
                return Err(Error::Numerical(format!(
                    "evidence update diverged (alpha {new_alpha}, lambda {new_lambda})"
                )));
            }
            let done = ((new_alpha - alpha) / alpha).abs() < TOL && ((new_lambda - lambda) / lambda).abs() < TOL;
            alpha = new_alpha;
            lambda = new_lambda;
            if done {
                break;
            }
        }
        Ok(Self::posterior(&c, q, &evals, &qt_xty, alpha, lambda, iterations))
    }

    /// Posterior under fixed precisions, without re-estimation.
    pub fn fit_fixed(x: &DMatrix<f64>, y: &[f64], alpha: f64, lambda: f64) -> Result<Self> {
        check_training(x, y)?;
        if !(alpha > 0.0 && lambda > 0.0) {
            return Err(Error::Config(format!("precisions must be positive, got alpha {alpha}, lambda {lambda}")));
        }
        let c = center(x, y);
        let eig = SymmetricEigen::new(c.x.transpose() * &c.x);
        let evals: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(0.0)).collect();
        let qt_xty = eig.eigenvectors.transpose() * (c.x.transpose() * &c.y);
        Ok(Self::posterior(&c, &eig.eigenvectors, &evals, &qt_xty, alpha, lambda, 0))
    }

    fn posterior(
        c: &Centered,
        q: &DMatrix<f64>,
        evals: &[f64],
        qt_xty: &DVector<f64>,
        alpha: f64,
        lambda: f64,
        iterations: usize,
    ) -> Self {
        let d = evals.len();
        let inv = DVector::from_iterator(d, evals.iter().map(|&e| 1.0 / (lambda + alpha * e)));
        let coef = q * DVector::from_iterator(d, (0..d).map(|i| alpha * qt_xty[i] * inv[i]));
        let sigma = q * DMatrix::from_diagonal(&inv) * q.transpose();
        let intercept = c.y_offset - c.x_offset.dot(&coef);
        BayesianRidge {
            coef: coef.iter().copied().collect(),
            intercept,
            x_offset: c.x_offset.iter().copied().collect(),
            alpha,
            lambda,
            sigma: sigma.transpose().iter().copied().collect(),
            iterations,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<PredictiveDistribution>> {
        let d = self.coef.len();
        check_inputs(x, d)?;
        Ok((0..x.nrows())
            .map(|r| {
                let row: Vec<f64> = (0..d).map(|j| x[(r, j)] - self.x_offset[j]).collect();
                let mean = self.intercept + (0..d).map(|j| x[(r, j)] * self.coef[j]).sum::<f64>();
                let mut quad = 0.0;
                for a in 0..d {
                    let s: f64 = (0..d).map(|b| self.sigma[a * d + b] * row[b]).sum();
                    quad += row[a] * s;
                }
                PredictiveDistribution::new(mean, quad.max(0.0) + 1.0 / self.alpha)
            })
            .collect())
    }
}
