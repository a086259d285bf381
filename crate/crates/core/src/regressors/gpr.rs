//! Exact Gaussian process regression with an isotropic RBF kernel plus white
//! noise. Targets are z-scored internally.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{check_inputs, check_training, PredictiveDistribution};
use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;

/// Kernel hyperparameters in natural-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprHyper {
    pub log_length_scale: f64,
    pub log_signal_variance: f64,
    pub log_noise_variance: f64,
}

impl Default for GprHyper {
    fn default() -> Self {
        GprHyper { log_length_scale: 0.0, log_signal_variance: 0.0, log_noise_variance: -4.0 }
    }
}

impl GprHyper {
    pub fn length_scale(&self) -> f64 {
        self.log_length_scale.exp()
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    pub hyper: GprHyper,
    /// Training inputs, n×d.
    pub x_train: DMatrix<f64>,
    /// `K⁻¹ y` on the z-scored targets.
    pub weights: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
    /// Diagonal jitter that made the kernel matrix factorizable.
    pub jitter: f64,
    chol: Cholesky<f64, Dyn>,
}

fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|k| (a[(i, k)] - b[(j, k)]).powi(2)).sum()
}

fn kernel_matrix(x: &DMatrix<f64>, h: &GprHyper, diag: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let (sf, l2) = (h.signal_variance(), 2.0 * h.length_scale().powi(2));
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = sf + diag;
        for j in 0..i {
            let v = sf * (-sq_dist(x, i, x, j) / l2).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Factorizes `K + σ_n² I + jitter·I`, escalating the jitter ×10 on failure.
fn factorize(x: &DMatrix<f64>, h: &GprHyper, start: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = start;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        if let Some(c) = Cholesky::new(kernel_matrix(x, h, h.noise_variance() + jitter)) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!("kernel matrix not positive definite with jitter up to {JITTER_MAX:e}")))
}

impl GaussianProcess {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], hyper: &GprHyper) -> Result<Self> {
        check_training(x, y)?;
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        let y_std = if sd > 0.0 { sd } else { 1.0 };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_std));
        let (chol, jitter) = factorize(x, hyper, JITTER_START)?;
        let weights = chol.solve(&ys);
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite GP weights".into()));
        }
        Ok(GaussianProcess {
            hyper: *hyper,
            x_train: x.clone(),
            weights: weights.iter().copied().collect(),
            y_mean,
            y_std,
            jitter,
            chol,
        })
    }

    /// Rebuilds a fitted process from persisted parts, refactorizing the
    /// kernel matrix with the recorded jitter.
    pub fn from_parts(
        hyper: GprHyper,
        x_train: DMatrix<f64>,
        weights: Vec<f64>,
        y_mean: f64,
        y_std: f64,
        jitter: f64,
    ) -> Result<Self> {
        let chol = Cholesky::new(kernel_matrix(&x_train, &hyper, hyper.noise_variance() + jitter))
            .ok_or_else(|| Error::Numerical("stored kernel matrix no longer factorizes".into()))?;
        Ok(GaussianProcess { hyper, x_train, weights, y_mean, y_std, jitter, chol })
    }

    /// Posterior means only; skips the triangular solves of [`Self::predict`].
    pub fn predict_mean(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_inputs(x, self.x_train.ncols())?;
        let h = &self.hyper;
        let (sf, l2) = (h.signal_variance(), 2.0 * h.length_scale().powi(2));
        let n = self.x_train.nrows();
        Ok((0..x.nrows())
            .map(|r| {
                let ks = (0..n).map(|i| sf * (-sq_dist(x, r, &self.x_train, i) / l2).exp());
                let mean_s: f64 = ks.zip(&self.weights).map(|(a, b)| a * b).sum();
                self.y_mean + self.y_std * mean_s
            })
            .collect())
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<PredictiveDistribution>> {
        check_inputs(x, self.x_train.ncols())?;
        let h = &self.hyper;
        let (sf, sn, l2) = (h.signal_variance(), h.noise_variance(), 2.0 * h.length_scale().powi(2));
        let n = self.x_train.nrows();
        Ok((0..x.nrows())
            .map(|r| {
                let ks = DVector::from_iterator(n, (0..n).map(|i| sf * (-sq_dist(x, r, &self.x_train, i) / l2).exp()));
                let mean_s: f64 = ks.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
                let v = self.chol.l().solve_lower_triangular(&ks).unwrap_or_else(|| DVector::zeros(n));
                let var_s = (sf - v.norm_squared()).max(0.0) + sn;
                PredictiveDistribution::new(self.y_mean + self.y_std * mean_s, var_s * self.y_std * self.y_std)
            })
            .collect())
    }
}
