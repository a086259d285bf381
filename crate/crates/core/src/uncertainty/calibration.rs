use serde::{Deserialize, Serialize};

use super::normal;
use crate::error::{Error, Result};
use crate::regressors::PredictiveDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityCurve {
    pub levels: Vec<f64>,
    pub frequencies: Vec<f64>,
}

/// Empirical frequency of `F_n(y_n) <= p_j` at levels `p_j = j/(m+1)`.
pub fn reliability(preds: &[PredictiveDistribution], y: &[f64], m: usize) -> Result<ReliabilityCurve> {
    if preds.is_empty() || preds.len() != y.len() {
        return Err(Error::InvalidData(format!(
            "reliability needs matching non-empty inputs, got {} predictions and {} targets",
            preds.len(),
            y.len()
        )));
    }
    if m < 2 {
        return Err(Error::Config(format!("reliability needs at least 2 levels, got {m}")));
    }
    let mut pit: Vec<f64> = preds.iter().zip(y).map(|(p, &t)| p.cdf(t)).collect();
    pit.sort_by(f64::total_cmp);
    let n = pit.len() as f64;
    let levels: Vec<f64> = (1..=m).map(|j| j as f64 / (m + 1) as f64).collect();
    let frequencies = levels.iter().map(|&p| pit.partition_point(|&u| u <= p) as f64 / n).collect();
    Ok(ReliabilityCurve { levels, frequencies })
}

/// Reliability curve whose levels are the sorted distinct PIT values.
pub fn pit_curve(preds: &[PredictiveDistribution], y: &[f64]) -> Result<ReliabilityCurve> {
    if preds.is_empty() || preds.len() != y.len() {
        return Err(Error::InvalidData("PIT curve needs matching non-empty inputs".into()));
    }
    let mut pit: Vec<f64> = preds.iter().zip(y).map(|(p, &t)| p.cdf(t)).collect();
    pit.sort_by(f64::total_cmp);
    let n = pit.len() as f64;
    let mut levels: Vec<f64> = Vec::with_capacity(pit.len());
    let mut frequencies: Vec<f64> = Vec::with_capacity(pit.len());
    for (i, &u) in pit.iter().enumerate() {
        if levels.last() == Some(&u) {
            *frequencies.last_mut().unwrap() = (i + 1) as f64 / n;
        } else {
            levels.push(u);
            frequencies.push((i + 1) as f64 / n);
        }
    }
    Ok(ReliabilityCurve { levels, frequencies })
}

/// Pool-adjacent-violators: least-squares non-decreasing fit with unit weights.
pub fn pava(y: &[f64]) -> Vec<f64> {
    // Blocks of (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 <= s2 / c2 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
        }
    }
    blocks.iter().flat_map(|&(s, c)| std::iter::repeat_n(s / c as f64, c)).collect()
}

/// Monotone piecewise-linear map from nominal to observed probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationMap {
    pub knots_x: Vec<f64>,
    pub knots_y: Vec<f64>,
}

impl Default for RecalibrationMap {
    fn default() -> Self {
        Self::identity()
    }
}

impl RecalibrationMap {
    pub fn identity() -> Self {
        RecalibrationMap { knots_x: vec![0.0, 1.0], knots_y: vec![0.0, 1.0] }
    }

    /// Isotonic fit of the curve, pinned to (0,0) and (1,1).
    pub fn fit(curve: &ReliabilityCurve) -> Result<Self> {
        let mut distinct = curve.levels.clone();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::InvalidData("recalibration needs at least 2 distinct levels".into()));
        }
        let fitted = pava(&curve.frequencies);
        let mut knots_x = vec![0.0];
        let mut knots_y = vec![0.0];
        for (&x, &y) in curve.levels.iter().zip(&fitted) {
            if x > 0.0 && x < 1.0 {
                knots_x.push(x);
                knots_y.push(y.clamp(0.0, 1.0));
            }
        }
        knots_x.push(1.0);
        knots_y.push(1.0);
        Ok(RecalibrationMap { knots_x, knots_y })
    }

    /// Fits the map on calibration predictions, using every observed PIT
    /// value `F_n(y_n)` as a level so the tails are resolved to `1/N`.
    pub fn fit_predictions(preds: &[PredictiveDistribution], y: &[f64]) -> Result<Self> {
        Self::fit(&pit_curve(preds, y)?)
    }

    pub fn eval(&self, p: f64) -> f64 {
        let (xs, ys) = (&self.knots_x, &self.knots_y);
        if p <= xs[0] {
            return ys[0];
        }
        let k = xs.partition_point(|&x| x < p);
        if k >= xs.len() {
            return ys[ys.len() - 1];
        }
        let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
        if x1 == x0 {
            y1
        } else {
            y0 + (p - x0) / (x1 - x0) * (y1 - y0)
        }
    }

    /// Smallest nominal level whose mapped frequency reaches `target`.
    pub fn inverse(&self, target: f64) -> f64 {
        let (xs, ys) = (&self.knots_x, &self.knots_y);
        let k = ys.partition_point(|&y| y < target);
        if k == 0 {
            return xs[0];
        }
        if k >= ys.len() {
            return xs[xs.len() - 1];
        }
        let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
        x0 + (target - y0) / (y1 - y0) * (x1 - x0)
    }

    /// Factor applied to σ so that the nominal 90% interval covers the
    /// nominal levels the map sends to 0.05 and 0.95.
    pub fn sigma_scale(&self) -> f64 {
        let clamp = |p: f64| p.clamp(1e-12, 1.0 - 1e-12);
        let (lo, hi) = (clamp(self.inverse(0.05)), clamp(self.inverse(0.95)));
        let width = normal::quantile(hi) - normal::quantile(lo);
        let k = width / (2.0 * normal::z90());
        if (k - 1.0).abs() < 1e-12 {
            1.0
        } else {
            k.max(1e-6)
        }
    }

    pub fn apply(&self, pred: PredictiveDistribution) -> PredictiveDistribution {
        let k = self.sigma_scale();
        PredictiveDistribution::new(pred.mean, pred.variance * k * k)
    }

    pub fn apply_all(&self, preds: &[PredictiveDistribution]) -> Vec<PredictiveDistribution> {
        preds.iter().map(|&p| self.apply(p)).collect()
    }
}
