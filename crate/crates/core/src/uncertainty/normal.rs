//! Standard normal CDF and quantile via the complementary error function.

use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Φ⁻¹(p), refined with Newton steps on [`cdf`].
pub fn quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    if !z.is_finite() {
        return z;
    }
    for _ in 0..2 {
        let d = pdf(z);
        if d <= 0.0 {
            break;
        }
        z -= (cdf(z) - p) / d;
    }
    z
}

/// Two-sided 90% quantile, Φ⁻¹(0.95).
pub fn z90() -> f64 {
    quantile(0.95)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-15);
        assert!((z90() - 1.644_853_626_951_472_2).abs() < 1e-14);
        for p in [0.001, 0.05, 0.3, 0.5, 0.8, 0.999] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-15);
        }
    }
}
