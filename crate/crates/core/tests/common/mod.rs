//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use soh_core::regressors::PredictiveDistribution;

pub type Point = [f64; 2];

fn euclid(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Minimum over every monotone coupling of the maximum paired distance.
pub fn frechet_brute(a: &[Point], b: &[Point]) -> f64 {
    fn walk(a: &[Point], b: &[Point], i: usize, j: usize, worst: f64, best: &mut f64) {
        let worst = worst.max(euclid(a[i], b[j]));
        if worst >= *best {
            return;
        }
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = worst;
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, worst, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, worst, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, worst, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

pub fn hausdorff_brute(a: &[Point], b: &[Point]) -> f64 {
    let mut worst = 0.0f64;
    for &p in a {
        let mut nearest = f64::INFINITY;
        for &q in b {
            nearest = nearest.min(euclid(p, q));
        }
        worst = worst.max(nearest);
    }
    worst
}

/// Two-pass sample moments: `(m3 / ((n-1) sd^3), m4 / ((n-1) sd^4))`.
pub fn skew_kurt_two_pass(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mut mean = 0.0;
    for v in x {
        mean += v;
    }
    mean /= n;
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    let sd = (s2 / (n - 1.0)).sqrt();
    (s3 / ((n - 1.0) * sd.powi(3)), s4 / ((n - 1.0) * sd.powi(4)))
}

/// Penalized least squares on centered data:
/// `w = (Xc'Xc + (lambda/alpha) I)^-1 Xc'yc`, intercept from the means.
pub fn penalized_ls(x: &DMatrix<f64>, y: &[f64], alpha: f64, lambda: f64) -> (Vec<f64>, f64) {
    let (n, d) = (x.nrows(), x.ncols());
    let xm: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - xm[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let a = xc.transpose() * &xc + DMatrix::identity(d, d) * (lambda / alpha);
    let w = a.lu().solve(&(xc.transpose() * yc)).expect("regular system");
    let intercept = ym - (0..d).map(|j| xm[j] * w[j]).sum::<f64>();
    (w.iter().copied().collect(), intercept)
}

/// GP posterior for two 1-D training points written out by hand, in the
/// standardized target scale, then mapped back.
pub fn gp_two_points(x: [f64; 2], y: [f64; 2], ls: f64, sf: f64, sn: f64, jitter: f64, xs: f64) -> (f64, f64) {
    let ym = 0.5 * (y[0] + y[1]);
    let ysd = 0.5 * (y[0] - y[1]).abs();
    let t = [(y[0] - ym) / ysd, (y[1] - ym) / ysd];
    let k = |a: f64, b: f64| sf * (-(a - b) * (a - b) / (2.0 * ls * ls)).exp();
    let a = sf + sn + jitter;
    let b = k(x[0], x[1]);
    let det = a * a - b * b;
    let inv = [[a / det, -b / det], [-b / det, a / det]];
    let ks = [k(xs, x[0]), k(xs, x[1])];
    let w = [inv[0][0] * t[0] + inv[0][1] * t[1], inv[1][0] * t[0] + inv[1][1] * t[1]];
    let mean = ks[0] * w[0] + ks[1] * w[1];
    let quad = ks[0] * (inv[0][0] * ks[0] + inv[0][1] * ks[1]) + ks[1] * (inv[1][0] * ks[0] + inv[1][1] * ks[1]);
    let var = sf - quad + sn;
    (ym + ysd * mean, var * ysd * ysd)
}

/// Literal IJ estimate for one query: `inbag[b][i]` counts and `t[b]` tree outputs.
pub fn ij_literal(inbag: &[Vec<f64>], t: &[f64]) -> f64 {
    let bt = t.len();
    let n = inbag[0].len();
    let tbar = t.iter().sum::<f64>() / bt as f64;
    let dev: Vec<f64> = t.iter().map(|v| v - tbar).collect();
    let mut total = 0.0;
    for i in 0..n {
        let nbar = inbag.iter().map(|c| c[i]).sum::<f64>() / bt as f64;
        let centered: Vec<f64> = inbag.iter().map(|c| c[i] - nbar).collect();
        let mut cov = 0.0;
        for b in 0..bt {
            cov += centered[b] * dev[b];
        }
        cov /= bt as f64;
        total += cov * cov;
    }
    let spread: f64 = dev.iter().map(|d| d * d).sum();
    total - n as f64 / (bt * bt) as f64 * spread
}

/// Central finite-difference gradient of `f` at `p`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|k| {
            q[k] = p[k] + h;
            let up = f(&q);
            q[k] = p[k] - h;
            let down = f(&q);
            q[k] = p[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Least-squares non-decreasing fit by exhaustive search over contiguous
/// partitions whose block means are non-decreasing.
pub fn monotone_projection_brute(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = Vec::with_capacity(n);
        let mut start = 0;
        let mut prev = f64::NEG_INFINITY;
        let mut ok = true;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let m = y[start..end].iter().sum::<f64>() / (end - start) as f64;
                if m < prev - 1e-12 {
                    ok = false;
                    break;
                }
                prev = m;
                fit.extend(std::iter::repeat_n(m, end - start));
                start = end;
            }
        }
        if !ok {
            continue;
        }
        let sse: f64 = fit.iter().zip(y).map(|(f, v)| (f - v).powi(2)).sum();
        if best.as_ref().is_none_or(|(s, _)| sse < *s - 1e-15) {
            best = Some((sse, fit));
        }
    }
    best.expect("the single block is always feasible").1
}

fn gaussian_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// β by integrating each predictive density over its ±alpha zone.
pub fn beta_quadrature(preds: &[PredictiveDistribution], y: &[f64], alpha: f64) -> f64 {
    let total: f64 = preds
        .iter()
        .zip(y)
        .map(|(p, &t)| {
            let sd = p.variance.sqrt();
            let pdf = move |x: f64| gaussian_pdf(x, p.mean, sd);
            simpson(&pdf, t * (1.0 - alpha), t * (1.0 + alpha), 1e-8)
        })
        .sum();
    total / preds.len() as f64
}
