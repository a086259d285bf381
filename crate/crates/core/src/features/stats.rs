//! Scalar statistics over segment series.

use crate::defaults::SHANNON_BINS;
use crate::error::{Error, Result};

fn trapezoid(t: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    (1..t.len()).map(|k| 0.5 * (f(k - 1) + f(k)) * (t[k] - t[k - 1])).sum()
}

/// Charge in Ah from a current series in amperes over seconds.
pub fn integral_capacity(t: &[f64], current: &[f64]) -> f64 {
    trapezoid(t, |k| current[k]) / 3600.0
}

/// Energy in Wh from voltage and current series over seconds.
pub fn integral_energy(t: &[f64], voltage: &[f64], current: &[f64]) -> f64 {
    trapezoid(t, |k| voltage[k] * current[k]) / 3600.0
}

/// Time-weighted mean of a series.
pub fn time_mean(t: &[f64], x: &[f64]) -> f64 {
    let span = t[t.len() - 1] - t[0];
    if span > 0.0 {
        trapezoid(t, |k| x[k]) / span
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn moments(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 3 {
        return Err(Error::DegenerateSeries(format!("need at least 3 samples, got {n}")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSeries("zero standard deviation".into()));
    }
    Ok((mean, sd))
}

/// `sum((x - mean)^3) / ((n - 1) * sd^3)` with the sample standard deviation.
pub fn skewness(x: &[f64]) -> Result<f64> {
    let (mean, sd) = moments(x)?;
    let m3: f64 = x.iter().map(|v| (v - mean).powi(3)).sum();
    Ok(m3 / ((x.len() - 1) as f64 * sd.powi(3)))
}

/// `sum((x - mean)^4) / ((n - 1) * sd^4)` with the sample standard deviation.
pub fn kurtosis(x: &[f64]) -> Result<f64> {
    let (mean, sd) = moments(x)?;
    let m4: f64 = x.iter().map(|v| (v - mean).powi(4)).sum();
    Ok(m4 / ((x.len() - 1) as f64 * sd.powi(4)))
}

/// Shannon entropy in bits of values in `[0, 1]` over equal-width bins.
pub fn shannon_entropy(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::DegenerateSeries("empty series".into()));
    }
    let mut counts = [0usize; SHANNON_BINS];
    for &v in x {
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::Domain(format!("value {v} outside [0, 1]")));
        }
        let b = ((v * SHANNON_BINS as f64) as usize).min(SHANNON_BINS - 1);
        counts[b] += 1;
    }
    let n = x.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Ordinary least-squares slope of `v` against `t`.
pub fn slope(t: &[f64], v: &[f64]) -> Result<f64> {
    let n = t.len() as f64;
    if t.len() < 2 {
        return Err(Error::DegenerateSeries("slope needs two points".into()));
    }
    let tm = t.iter().sum::<f64>() / n;
    let vm = v.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - tm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateSeries("time has no spread".into()));
    }
    let sxy: f64 = t.iter().zip(v).map(|(x, y)| (x - tm) * (y - vm)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::{Matrix2, Vector2};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn capacity_examples() {
        assert!((integral_capacity(&[0.0, 3600.0], &[1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((integral_capacity(&[0.0, 1800.0, 3600.0], &[2.0, 1.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_examples() {
        assert!((integral_energy(&[0.0, 3600.0], &[4.0, 4.0], &[1.0, 1.0]) - 4.0).abs() < 1e-15);
        assert_eq!(integral_energy(&[0.0, 10.0, 20.0], &[0.0; 3], &[1.0, 2.0, 3.0]), 0.0);
    }

    /// Piecewise-linear curves integrated on a 10x finer Riemann grid.
    fn riemann(t: &[f64], f: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 1..t.len() {
            let h = (t[k] - t[k - 1]) / 10.0;
            for j in 0..10 {
                let u = (j as f64 + 0.5) / 10.0;
                s += (f[k - 1] + u * (f[k] - f[k - 1])) * h;
            }
        }
        s / 3600.0
    }

    #[test]
    fn integrals_match_fine_grid_oracle() {
        let mut r = rng::substream(1, "test", 0);
        let mut t = vec![0.0];
        for _ in 1..50 {
            t.push(t.last().unwrap() + r.random_range(5.0..60.0));
        }
        let i: Vec<f64> = (0..50).map(|_| r.random_range(0.2..1.5)).collect();
        let v: Vec<f64> = (0..50).map(|_| r.random_range(3.5..4.2)).collect();
        assert!((integral_capacity(&t, &i) - riemann(&t, &i)).abs() < 1e-3);
        // The product of two linear pieces is quadratic; the midpoint grid
        // still resolves it well below the tolerance.
        let fine = {
            let mut s = 0.0;
            for k in 1..t.len() {
                let h = (t[k] - t[k - 1]) / 10.0;
                for j in 0..10 {
                    let u = (j as f64 + 0.5) / 10.0;
                    let vv = v[k - 1] + u * (v[k] - v[k - 1]);
                    let ii = i[k - 1] + u * (i[k] - i[k - 1]);
                    s += vv * ii * h;
                }
            }
            s / 3600.0
        };
        assert!((integral_energy(&t, &v, &i) - fine).abs() < 1e-3);
    }

    /// Two-pass reference with explicit loops.
    fn two_pass(x: &[f64], power: i32) -> f64 {
        let n = x.len();
        let mut mean = 0.0;
        for v in x {
            mean += v;
        }
        mean /= n as f64;
        let mut ss = 0.0;
        let mut sp = 0.0;
        for v in x {
            let d = v - mean;
            ss += d * d;
            sp += d.powi(power);
        }
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        sp / ((n as f64 - 1.0) * sd.powi(power))
    }

    #[test]
    fn skewness_kurtosis_examples() {
        assert!(skewness(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap().abs() < 1e-15);
        let x = [0.0, 0.0, 0.0, 1.0];
        // mean 0.25, sample sd = 0.5: m3 = 3*(-0.25)^3 + 0.75^3 = 0.375,
        // skewness = 0.375 / (3 * 0.125) = 1.
        assert!((skewness(&x).unwrap() - 1.0).abs() < 1e-15);
        assert!((skewness(&x).unwrap() - two_pass(&x, 3)).abs() < 1e-15);
        assert!((kurtosis(&x).unwrap() - two_pass(&x, 4)).abs() < 1e-15);
        assert!(matches!(skewness(&[2.0; 5]), Err(Error::DegenerateSeries(_))));
        assert!(matches!(kurtosis(&[1.0, 2.0]), Err(Error::DegenerateSeries(_))));
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_entropy(&[0.5; 10]).unwrap(), 0.0);
        assert!((shannon_entropy(&[0.0, 0.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let uniform: Vec<f64> = (0..320).map(|k| (k as f64 + 0.5) / 320.0).collect();
        assert!((shannon_entropy(&uniform).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn slope_examples() {
        let t: Vec<f64> = (0..=10).map(|k| k as f64 * 50.0).collect();
        let v: Vec<f64> = t.iter().map(|x| x / 500.0).collect();
        assert!((slope(&t, &v).unwrap() - 1.0 / 500.0).abs() < 1e-15);
        assert_eq!(slope(&t, &[0.3; 11]).unwrap(), 0.0);
    }

    #[test]
    fn slope_matches_normal_equations() {
        let mut r = rng::substream(2, "test", 0);
        let t: Vec<f64> = (0..60).map(|k| k as f64 * 3.0).collect();
        let v: Vec<f64> = t.iter().map(|x| 0.2 + 0.004 * x + 0.01 * (r.random::<f64>() - 0.5)).collect();
        let n = t.len() as f64;
        let st: f64 = t.iter().sum();
        let stt: f64 = t.iter().map(|x| x * x).sum();
        let sv: f64 = v.iter().sum();
        let stv: f64 = t.iter().zip(&v).map(|(a, b)| a * b).sum();
        let sol = Matrix2::new(n, st, st, stt).lu().solve(&Vector2::new(sv, stv)).unwrap();
        assert!((slope(&t, &v).unwrap() - sol[1]).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn shape_moments_are_affine_invariant(
            x in proptest::collection::vec(-5.0f64..5.0, 4..50),
            a in 0.1f64..10.0,
            b in -10.0f64..10.0,
        ) {
            let sd = moments(&x).map(|m| m.1).unwrap_or(0.0);
            prop_assume!(sd > 1e-2);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let s = skewness(&x).unwrap();
            let k = kurtosis(&x).unwrap();
            prop_assert!((skewness(&y).unwrap() - s).abs() < 1e-8 * (1.0 + s.abs()));
            prop_assert!((kurtosis(&y).unwrap() - k).abs() < 1e-8 * (1.0 + k.abs()));
            prop_assert!((skewness(&neg).unwrap() + s).abs() < 1e-9 * (1.0 + s.abs()));
            prop_assert!((kurtosis(&neg).unwrap() - k).abs() < 1e-9 * (1.0 + k.abs()));
        }
    }
}
