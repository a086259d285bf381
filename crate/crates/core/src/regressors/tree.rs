//! CART regression tree: variance-reduction splits, grown until leaves are
//! pure or hold a single sample.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

const LEAF: i32 = -1;

/// Flattened tree: node `k` is a leaf when `feature[k] == -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl RegressionTree {
    /// Grows a tree on `samples` (row indices, repeats allowed) trying
    /// `mtry` non-constant features per node. Adds each feature's total
    /// squared-error reduction to `importance`.
    pub fn fit(
        x: &DMatrix<f64>,
        y: &[f64],
        mut samples: Vec<usize>,
        mtry: usize,
        rng: &mut Rng,
        importance: &mut [f64],
    ) -> Self {
        let d = x.ncols();
        let cap = 2 * samples.len();
        let mut tree = RegressionTree {
            feature: Vec::with_capacity(cap),
            threshold: Vec::with_capacity(cap),
            left: Vec::with_capacity(cap),
            right: Vec::with_capacity(cap),
            value: Vec::with_capacity(cap),
        };
        let mut order: Vec<usize> = (0..d).collect();
        let mut pairs = Vec::with_capacity(samples.len());
        let mut scratch = Vec::with_capacity(samples.len());
        // Each node owns `samples[start..end]`.
        let mut stack = vec![(tree.push_leaf(0.0), 0, samples.len())];
        while let Some((node, start, end)) = stack.pop() {
            let idx = &mut samples[start..end];
            let n = idx.len() as f64;
            let sum: f64 = idx.iter().map(|&i| y[i]).sum();
            tree.value[node] = sum / n;
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(y[i]), b.max(y[i])));
            if idx.len() < 2 || lo == hi {
                continue;
            }
            order.shuffle(rng);
            let Some(split) = best_split(x, y, idx, &order, mtry, sum, &mut pairs) else {
                continue;
            };
            importance[split.feature] += split.score - sum * sum / n;
            let mid = start + stable_partition(x, &split, idx, &mut scratch);
            let l = tree.push_leaf(0.0);
            let r = tree.push_leaf(0.0);
            tree.feature[node] = split.feature as i32;
            tree.threshold[node] = split.threshold;
            tree.left[node] = l as u32;
            tree.right[node] = r as u32;
            stack.push((r, mid, end));
            stack.push((l, start, mid));
        }
        tree
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.feature.len()
    }

    pub fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        let mut k = 0;
        while self.feature[k] != LEAF {
            k = if x[(row, self.feature[k] as usize)] <= self.threshold[k] {
                self.left[k] as usize
            } else {
                self.right[k] as usize
            };
        }
        self.value[k]
    }
}

/// Moves the samples going left to the front, keeping relative order on
/// both sides. Returns the left count.
fn stable_partition(x: &DMatrix<f64>, split: &Split, idx: &mut [usize], scratch: &mut Vec<usize>) -> usize {
    let nr = x.nrows();
    let col = &x.as_slice()[split.feature * nr..(split.feature + 1) * nr];
    scratch.clear();
    let mut w = 0;
    for r in 0..idx.len() {
        let i = idx[r];
        if col[i] <= split.threshold {
            idx[w] = i;
            w += 1;
        } else {
            scratch.push(i);
        }
    }
    idx[w..].copy_from_slice(scratch);
    w
}

fn best_split(
    x: &DMatrix<f64>,
    y: &[f64],
    idx: &[usize],
    order: &[usize],
    mtry: usize,
    total: f64,
    pairs: &mut Vec<(f64, f64)>,
) -> Option<Split> {
    let n = idx.len();
    let nr = x.nrows();
    let xs = x.as_slice();
    let mut best: Option<Split> = None;
    let mut tried = 0;
    for &j in order {
        if tried == mtry {
            break;
        }
        pairs.clear();
        let col = &xs[j * nr..(j + 1) * nr];
        pairs.extend(idx.iter().map(|&i| (col[i], y[i])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[n - 1].0 {
            continue;
        }
        tried += 1;
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += pairs[k - 1].1;
            if pairs[k - 1].0 == pairs[k].0 {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                let (a, b) = (pairs[k - 1].0, pairs[k].0);
                let mid = 0.5 * (a + b);
                best = Some(Split { feature: j, threshold: if mid < b { mid } else { a }, score });
            }
        }
    }
    best
}

/// Draws `n` bootstrap indices from `0..n`.
pub fn bootstrap(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}
