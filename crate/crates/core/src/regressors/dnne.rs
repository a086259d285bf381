//! Deep ensemble of mean/variance networks trained on the Gaussian negative
//! log-likelihood.
//!
//! Each member is `d → h1 (ReLU) → h2 (LeakyReLU) → {mean, variance}` with a
//! sigmoid mean head and a softplus variance head.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_inputs, check_training, PredictiveDistribution};
use crate::defaults::{ADAM_LEARNING_RATE, ENSEMBLE_EPOCHS, ENSEMBLE_MEMBERS};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::substream;

pub const LEAKY_SLOPE: f64 = 0.01;
pub const VARIANCE_FLOOR: f64 = 1e-6;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DnneHyper {
    pub members: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for DnneHyper {
    fn default() -> Self {
        DnneHyper { members: ENSEMBLE_MEMBERS, epochs: ENSEMBLE_EPOCHS, learning_rate: ADAM_LEARNING_RATE }
    }
}

/// Hidden layer widths for `d` inputs: `ceil(d/2)` then half of that rounded
/// down, or (4, 3) when `d < 10`.
pub fn hidden_sizes(d: usize) -> (usize, usize) {
    if d < 10 {
        (4, 3)
    } else {
        let h1 = d.div_ceil(2);
        (h1, (h1 / 2).max(1))
    }
}

/// Layer sizes and offsets into the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub inputs: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Shape {
    pub fn for_inputs(d: usize) -> Self {
        let (hidden1, hidden2) = hidden_sizes(d);
        Shape { inputs: d, hidden1, hidden2 }
    }

    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.hidden1 * self.inputs
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden1
    }
    fn b2(&self) -> usize {
        self.w2() + self.hidden2 * self.hidden1
    }
    fn wm(&self) -> usize {
        self.b2() + self.hidden2
    }
    fn bm(&self) -> usize {
        self.wm() + self.hidden2
    }
    fn wv(&self) -> usize {
        self.bm() + 1
    }
    fn bv(&self) -> usize {
        self.wv() + self.hidden2
    }

    pub fn param_count(&self) -> usize {
        self.bv() + 1
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn softplus_inv(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp_m1().ln()
    }
}

struct Activations {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    mean: f64,
    zv: f64,
    var: f64,
}

fn forward(s: &Shape, p: &[f64], x: &[f64]) -> Activations {
    let z1: Vec<f64> = (0..s.hidden1)
        .map(|h| p[s.b1() + h] + (0..s.inputs).map(|j| p[s.w1() + h * s.inputs + j] * x[j]).sum::<f64>())
        .collect();
    let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
    let z2: Vec<f64> = (0..s.hidden2)
        .map(|h| p[s.b2() + h] + (0..s.hidden1).map(|j| p[s.w2() + h * s.hidden1 + j] * a1[j]).sum::<f64>())
        .collect();
    let a2: Vec<f64> = z2.iter().map(|&z| if z > 0.0 { z } else { LEAKY_SLOPE * z }).collect();
    let zm = p[s.bm()] + (0..s.hidden2).map(|h| p[s.wm() + h] * a2[h]).sum::<f64>();
    let zv = p[s.bv()] + (0..s.hidden2).map(|h| p[s.wv() + h] * a2[h]).sum::<f64>();
    Activations { z1, a1, z2, a2, mean: sigmoid(zm), zv, var: softplus(zv) + VARIANCE_FLOOR }
}

/// Gaussian NLL `½ log σ² + (y−μ)²/(2σ²)`.
pub fn nll(mean: f64, var: f64, y: f64) -> f64 {
    0.5 * var.ln() + (y - mean).powi(2) / (2.0 * var)
}

/// Mean NLL over the rows and its analytic gradient with respect to `params`.
pub fn loss_and_gradient(shape: &Shape, params: &[f64], rows: &[&[f64]], y: &[f64]) -> (f64, Vec<f64>) {
    let s = shape;
    let mut grad = vec![0.0; s.param_count()];
    let mut loss = 0.0;
    let inv_n = 1.0 / rows.len() as f64;
    for (x, &t) in rows.iter().zip(y) {
        let a = forward(s, params, x);
        loss += nll(a.mean, a.var, t);
        let d_mean = (a.mean - t) / a.var * inv_n;
        let d_var = (0.5 / a.var - (t - a.mean).powi(2) / (2.0 * a.var * a.var)) * inv_n;
        let dzm = d_mean * a.mean * (1.0 - a.mean);
        let dzv = d_var * sigmoid(a.zv);
        grad[s.bm()] += dzm;
        grad[s.bv()] += dzv;
        let mut dz2 = vec![0.0; s.hidden2];
        for h in 0..s.hidden2 {
            grad[s.wm() + h] += dzm * a.a2[h];
            grad[s.wv() + h] += dzv * a.a2[h];
            let da2 = dzm * params[s.wm() + h] + dzv * params[s.wv() + h];
            dz2[h] = if a.z2[h] > 0.0 { da2 } else { LEAKY_SLOPE * da2 };
        }
        let mut da1 = vec![0.0; s.hidden1];
        for h in 0..s.hidden2 {
            grad[s.b2() + h] += dz2[h];
            for j in 0..s.hidden1 {
                grad[s.w2() + h * s.hidden1 + j] += dz2[h] * a.a1[j];
                da1[j] += dz2[h] * params[s.w2() + h * s.hidden1 + j];
            }
        }
        for h in 0..s.hidden1 {
            if a.z1[h] <= 0.0 {
                continue;
            }
            grad[s.b1() + h] += da1[h];
            for j in 0..s.inputs {
                grad[s.w1() + h * s.inputs + j] += da1[h] * x[j];
            }
        }
    }
    (loss * inv_n, grad)
}

/// Glorot-uniform weights, zero hidden biases, and output biases set so the
/// untrained member predicts the target mean and variance.
pub fn initial_params(shape: &Shape, seed: u64, member: usize, y_mean: f64, y_var: f64) -> Vec<f64> {
    let s = shape;
    let mut rng = substream(seed, "dnne-init", member as u64);
    let mut p = vec![0.0; s.param_count()];
    let mut fill = |p: &mut [f64], start: usize, fan_in: usize, fan_out: usize| {
        let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut p[start..start + fan_in * fan_out] {
            *v = rng.random_range(-lim..lim);
        }
    };
    fill(&mut p, s.w1(), s.inputs, s.hidden1);
    fill(&mut p, s.w2(), s.hidden1, s.hidden2);
    fill(&mut p, s.wm(), s.hidden2, 1);
    fill(&mut p, s.wv(), s.hidden2, 1);
    let m = y_mean.clamp(0.01, 0.99);
    p[s.bm()] = (m / (1.0 - m)).ln();
    p[s.bv()] = softplus_inv(y_var.max(1e-4));
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepEnsemble {
    pub shape: Shape,
    /// One flat parameter vector per member.
    pub members: Vec<Vec<f64>>,
    /// Number of training targets above 1 clipped for the sigmoid head.
    pub clipped_targets: usize,
    pub final_losses: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64]) {
        self.t += 1;
        let (c1, c2) = (1.0 - BETA1.powi(self.t), 1.0 - BETA2.powi(self.t));
        for k in 0..p.len() {
            self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g[k];
            self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g[k] * g[k];
            p[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + ADAM_EPS);
        }
    }
}

fn train_member(
    shape: &Shape,
    rows: &[Vec<f64>],
    y: &[f64],
    batches: &[Vec<usize>],
    hyper: &DnneHyper,
    seed: u64,
    member: usize,
    (y_mean, y_var): (f64, f64),
) -> Result<(Vec<f64>, f64)> {
    let mut params = initial_params(shape, seed, member, y_mean, y_var);
    let mut adam = Adam::new(params.len(), hyper.learning_rate);
    let mut rng = substream(seed, "dnne-batches", member as u64);
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut last = f64::NAN;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &b in &order {
            let xs: Vec<&[f64]> = batches[b].iter().map(|&i| rows[i].as_slice()).collect();
            let ys: Vec<f64> = batches[b].iter().map(|&i| y[i]).collect();
            let (loss, grad) = loss_and_gradient(shape, &params, &xs, &ys);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { member, message: format!("non-finite loss at epoch {epoch}") });
            }
            epoch_loss += loss;
            adam.step(&mut params, &grad);
        }
        last = epoch_loss / batches.len() as f64;
    }
    Ok((params, last))
}

/// Row indices grouped by cell label, in order of first appearance.
pub fn group_batches(groups: &[String]) -> Vec<Vec<usize>> {
    let mut keys: Vec<&str> = Vec::new();
    let mut batches: Vec<Vec<usize>> = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        match keys.iter().position(|k| *k == g.as_str()) {
            Some(b) => batches[b].push(i),
            None => {
                keys.push(g);
                batches.push(vec![i]);
            }
        }
    }
    batches
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl DeepEnsemble {
    pub fn fit(
        x: &DMatrix<f64>,
        y: &[f64],
        groups: &[String],
        hyper: &DnneHyper,
        seed: u64,
        exec: Execution,
    ) -> Result<Self> {
        check_training(x, y)?;
        if groups.len() != y.len() {
            return Err(Error::InvalidData("group labels must cover every row".into()));
        }
        if hyper.members == 0 || hyper.epochs == 0 || !(hyper.learning_rate > 0.0) {
            return Err(Error::Config(format!("invalid ensemble settings {hyper:?}")));
        }
        let shape = Shape::for_inputs(x.ncols());
        let clipped_targets = y.iter().filter(|&&v| v > 1.0).count();
        if clipped_targets > 0 {
            log::warn!("clipped {clipped_targets} SOH targets above 1 for the sigmoid mean head");
        }
        let yc: Vec<f64> = y.iter().map(|&v| v.min(1.0)).collect();
        let n = yc.len() as f64;
        let y_mean = yc.iter().sum::<f64>() / n;
        let y_var = yc.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n;
        let rows = rows_of(x);
        let batches = group_batches(groups);
        let trained = exec.try_map_range(hyper.members, |m| {
            train_member(&shape, &rows, &yc, &batches, hyper, seed, m, (y_mean, y_var))
        })?;
        let (members, final_losses) = trained.into_iter().unzip();
        Ok(DeepEnsemble { shape, members, clipped_targets, final_losses })
    }

    /// Per-member (mean, variance) for one input row.
    pub fn member_outputs(&self, x: &[f64]) -> Vec<(f64, f64)> {
        self.members
            .iter()
            .map(|p| {
                let a = forward(&self.shape, p, x);
                (a.mean, a.var)
            })
            .collect()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<PredictiveDistribution>> {
        check_inputs(x, self.shape.inputs)?;
        Ok(rows_of(x).iter().map(|r| aggregate(&self.member_outputs(r))).collect())
    }
}

/// Mixture moments: `μ* = mean μ_m`, `σ*² = mean(σ_m² + μ_m²) − μ*²`.
pub fn aggregate(outputs: &[(f64, f64)]) -> PredictiveDistribution {
    let m = outputs.len() as f64;
    let mean = outputs.iter().map(|o| o.0).sum::<f64>() / m;
    let var = outputs.iter().map(|&(mu, v)| v + (mu - mean).powi(2)).sum::<f64>() / m;
    PredictiveDistribution::new(mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_sizes() {
        assert_eq!(hidden_sizes(18), (9, 4));
        assert_eq!(hidden_sizes(5), (4, 3));
        assert_eq!(hidden_sizes(9), (4, 3));
        assert_eq!(hidden_sizes(10), (5, 2));
        assert_eq!(hidden_sizes(30), (15, 7));
    }

    #[test]
    fn aggregate_matches_mixture_moments() {
        let outs = [(0.9, 1e-4), (0.92, 2e-4), (0.88, 3e-4)];
        let p = aggregate(&outs);
        let mean = (0.9 + 0.92 + 0.88) / 3.0;
        let second = outs.iter().map(|(m, v)| v + m * m).sum::<f64>() / 3.0;
        assert!((p.mean - mean).abs() < 1e-15);
        assert!((p.variance - (second - mean * mean)).abs() < 1e-12);
    }

    #[test]
    fn batches_follow_cells() {
        let g: Vec<String> = ["a", "b", "a", "c", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(group_batches(&g), vec![vec![0, 2], vec![1, 4], vec![3]]);
    }
}
