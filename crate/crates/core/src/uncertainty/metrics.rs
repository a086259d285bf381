use serde::{Deserialize, Serialize};

use super::normal;
use crate::defaults::ALPHA_ZONE;
use crate::error::{Error, Result};
use crate::regressors::PredictiveDistribution;

fn check(pred: &[f64], y: &[f64]) -> Result<()> {
    if pred.is_empty() || pred.len() != y.len() {
        return Err(Error::InvalidData(format!(
            "metrics need matching non-empty inputs, got {} predictions and {} targets",
            pred.len(),
            y.len()
        )));
    }
    if y.contains(&0.0) {
        return Err(Error::Domain("percentage error undefined for a zero target".into()));
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(pred: &[f64], y: &[f64]) -> Result<f64> {
    check(pred, y)?;
    let s: f64 = pred.iter().zip(y).map(|(p, t)| ((t - p) / t).abs()).sum();
    Ok(100.0 * s / y.len() as f64)
}

/// Root mean squared percentage error, in percent.
pub fn rmspe(pred: &[f64], y: &[f64]) -> Result<f64> {
    check(pred, y)?;
    let s: f64 = pred.iter().zip(y).map(|(p, t)| ((t - p) / t).powi(2)).sum();
    Ok(100.0 * (s / y.len() as f64).sqrt())
}

/// Percentage of targets inside the central 90% predictive interval.
pub fn c_score(preds: &[PredictiveDistribution], y: &[f64]) -> Result<f64> {
    let mu: Vec<f64> = preds.iter().map(|p| p.mean).collect();
    check(&mu, y)?;
    let inside = preds.iter().zip(y).filter(|(p, &t)| {
        let (lo, hi) = p.interval90();
        lo <= t && t <= hi
    });
    Ok(100.0 * inside.count() as f64 / y.len() as f64)
}

/// Mean predicted standard deviation.
pub fn sharpness(preds: &[PredictiveDistribution]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::InvalidData("sharpness of an empty prediction set".into()));
    }
    Ok(preds.iter().map(|p| p.std()).sum::<f64>() / preds.len() as f64)
}

/// α-accuracy (%), β and PEP (%) for a relative zone of ±`alpha`.
pub fn alpha_beta_pep(preds: &[PredictiveDistribution], y: &[f64], alpha: f64) -> Result<(f64, f64, f64)> {
    let mu: Vec<f64> = preds.iter().map(|p| p.mean).collect();
    check(&mu, y)?;
    let n = y.len() as f64;
    let (mut hits, mut mass, mut early) = (0usize, 0.0, 0usize);
    for (p, &t) in preds.iter().zip(y) {
        if !(p.variance > 0.0) {
            return Err(Error::Domain(format!("non-positive predictive variance {}", p.variance)));
        }
        if (p.mean - t).abs() <= alpha * t.abs() {
            hits += 1;
        }
        let s = p.std();
        let (lo, hi) = (t * (1.0 - alpha), t * (1.0 + alpha));
        mass += (normal::cdf((hi - p.mean) / s) - normal::cdf((lo - p.mean) / s)).max(0.0);
        if p.mean < t {
            early += 1;
        }
    }
    Ok((100.0 * hits as f64 / n, (mass / n).clamp(0.0, 1.0), 100.0 * early as f64 / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mape: f64,
    pub rmspe: f64,
    pub c_score: f64,
    pub sharpness: f64,
    pub alpha_accuracy: f64,
    pub beta: f64,
    pub pep: f64,
    pub n: usize,
}

impl MetricsReport {
    pub fn compute(preds: &[PredictiveDistribution], y: &[f64]) -> Result<Self> {
        Self::compute_with_alpha(preds, y, ALPHA_ZONE)
    }

    pub fn compute_with_alpha(preds: &[PredictiveDistribution], y: &[f64], alpha: f64) -> Result<Self> {
        let mu: Vec<f64> = preds.iter().map(|p| p.mean).collect();
        let (alpha_accuracy, beta, pep) = alpha_beta_pep(preds, y, alpha)?;
        let report = MetricsReport {
            mape: mape(&mu, y)?,
            rmspe: rmspe(&mu, y)?,
            c_score: c_score(preds, y)?,
            sharpness: sharpness(preds)?,
            alpha_accuracy,
            beta,
            pep,
            n: y.len(),
        };
        if report.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite metric in {report:?}")));
        }
        Ok(report)
    }

    pub const COLUMNS: [&'static str; 8] = ["mape", "rmspe", "c_score", "sharpness", "alpha_accuracy", "beta", "pep", "n"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.mape,
            self.rmspe,
            self.c_score,
            self.sharpness,
            self.alpha_accuracy,
            self.beta,
            self.pep,
            self.n as f64,
        ]
    }

    /// Unweighted mean over reports; `n` is the total count.
    pub fn average(reports: &[MetricsReport]) -> Option<MetricsReport> {
        if reports.is_empty() {
            return None;
        }
        let k = reports.len() as f64;
        let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        Some(MetricsReport {
            mape: mean(|r| r.mape),
            rmspe: mean(|r| r.rmspe),
            c_score: mean(|r| r.c_score),
            sharpness: mean(|r| r.sharpness),
            alpha_accuracy: mean(|r| r.alpha_accuracy),
            beta: mean(|r| r.beta),
            pep: mean(|r| r.pep),
            n: reports.iter().map(|r| r.n).sum(),
        })
    }
}
