//! RANSAC rejection of erroneous capacity measurements on training cells.
//!
//! Consensus model: cubic polynomial of capacity against (rescaled) cycle
//! index, fitted to random minimal samples of four points. A point is an
//! inlier when its residual is within `threshold_factor` robust standard
//! deviations (1.4826 x median absolute residual) of the candidate fit. The
//! winning consensus set is refitted by least squares and the pass is repeated
//! on the surviving points until nothing more is rejected, which makes the
//! filter idempotent.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::seq::index::sample;

use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub samples: usize,
    pub min_points: usize,
    pub threshold_factor: f64,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig { samples: 200, min_points: 10, threshold_factor: 3.0, max_rounds: 50, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RansacOutcome {
    pub inliers: Vec<bool>,
    /// Set when there were too few points to filter; every point is kept.
    pub insufficient_points: bool,
}

impl RansacOutcome {
    pub fn outlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| !b).count()
    }
}

const MAD_TO_SIGMA: f64 = 1.4826;

fn cubic(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn interpolate(xs: [f64; 4], ys: [f64; 4]) -> Option<[f64; 4]> {
    let a = Matrix4::from_fn(|r, c| xs[r].powi(c as i32));
    let sol = a.lu().solve(&Vector4::from(ys))?;
    sol.iter().all(|v| v.is_finite()).then(|| [sol[0], sol[1], sol[2], sol[3]])
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Option<[f64; 4]> {
    let a = DMatrix::from_fn(xs.len(), 4, |r, c| xs[r].powi(c as i32));
    let b = DVector::from_column_slice(ys);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    sol.iter().all(|v| v.is_finite()).then(|| [sol[0], sol[1], sol[2], sol[3]])
}

fn threshold(residuals: &[f64], factor: f64, floor: f64) -> f64 {
    let mad = median(residuals.iter().map(|r| r.abs()).collect());
    (factor * MAD_TO_SIGMA * mad).max(floor)
}

/// One RANSAC pass over `(x, y)`; returns the inlier mask.
fn single_pass(xs: &[f64], ys: &[f64], cfg: &RansacConfig) -> Vec<bool> {
    let n = xs.len();
    let floor = 1e-6 * median(ys.iter().map(|y| y.abs()).collect()).max(f64::MIN_POSITIVE);
    let mut rng: Rng = rng::substream(cfg.seed, "ransac", n as u64);
    let mut best: Option<(usize, Vec<bool>)> = None;
    for _ in 0..cfg.samples {
        let idx = sample(&mut rng, n, 4);
        let pick = |k: usize| idx.index(k);
        let Some(coef) = interpolate(
            [xs[pick(0)], xs[pick(1)], xs[pick(2)], xs[pick(3)]],
            [ys[pick(0)], ys[pick(1)], ys[pick(2)], ys[pick(3)]],
        ) else {
            continue;
        };
        let res: Vec<f64> = xs.iter().zip(ys).map(|(&x, &y)| y - cubic(&coef, x)).collect();
        let thr = threshold(&res, cfg.threshold_factor, floor);
        let mask: Vec<bool> = res.iter().map(|r| r.abs() <= thr).collect();
        let count = mask.iter().filter(|&&b| b).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, mask));
        }
    }
    let Some((_, consensus)) = best else {
        return vec![true; n];
    };
    let (cx, cy): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .zip(&consensus)
        .filter(|(_, &keep)| keep)
        .map(|((&x, &y), _)| (x, y))
        .unzip();
    if cx.len() < 4 {
        return consensus;
    }
    let Some(coef) = least_squares(&cx, &cy) else {
        return consensus;
    };
    let inlier_res: Vec<f64> = cx.iter().zip(&cy).map(|(&x, &y)| y - cubic(&coef, x)).collect();
    let thr = threshold(&inlier_res, cfg.threshold_factor, floor);
    xs.iter().zip(ys).map(|(&x, &y)| (y - cubic(&coef, x)).abs() <= thr).collect()
}

/// Flags capacity outliers in a `(cycle_index, capacity)` series.
pub fn ransac_filter(points: &[(f64, f64)], cfg: &RansacConfig) -> RansacOutcome {
    let n = points.len();
    if n < cfg.min_points.max(5) {
        log::warn!("ransac: {n} points is below the minimum of {}; keeping all", cfg.min_points);
        return RansacOutcome { inliers: vec![true; n], insufficient_points: true };
    }
    let mut alive: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.max_rounds {
        if alive.len() < cfg.min_points {
            break;
        }
        let (lo, hi) = alive.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(points[i].0), hi.max(points[i].0))
        });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let xs: Vec<f64> = alive.iter().map(|&i| 2.0 * (points[i].0 - lo) / span - 1.0).collect();
        let ys: Vec<f64> = alive.iter().map(|&i| points[i].1).collect();
        let mask = single_pass(&xs, &ys, cfg);
        if mask.iter().all(|&b| b) {
            break;
        }
        alive = alive.into_iter().zip(mask).filter(|(_, keep)| *keep).map(|(i, _)| i).collect();
    }
    let mut inliers = vec![false; n];
    for i in alive {
        inliers[i] = true;
    }
    RansacOutcome { inliers, insufficient_points: false }
}
