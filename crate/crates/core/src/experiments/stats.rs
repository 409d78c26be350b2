use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::spectral::linear_fit;

/// Sample mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { count: 0, mean: f64::NAN, variance: f64::NAN, std_error: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        // two-pass with correction term keeps tiny variances honest
        let (mut s2, mut s1) = (0.0, 0.0);
        for &x in xs {
            s1 += x - mean;
            s2 += (x - mean) * (x - mean);
        }
        let variance = if n > 1 { (s2 - s1 * s1 / n as f64) / (n - 1) as f64 } else { 0.0 };
        let variance = variance.max(0.0);
        Self { count: n, mean, variance, std_error: (variance / n as f64).sqrt() }
    }
}

/// One-sided F test of `Var₁ > Var₂` for two independent normal samples.
/// Returns the p-value; `NaN` when either variance is zero.
pub fn variance_decrease_p_value(a: &Moments, b: &Moments) -> Result<f64> {
    if a.count < 2 || b.count < 2 {
        return Err(Error::Insufficient(format!(
            "variance test needs two samples of size >= 2 (got {}, {})",
            a.count, b.count
        )));
    }
    if a.variance <= 0.0 || b.variance <= 0.0 {
        return Ok(f64::NAN);
    }
    let f = FisherSnedecor::new((a.count - 1) as f64, (b.count - 1) as f64)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(f.sf(a.variance / b.variance))
}

/// Empirical decay order `p` of a sequence `m(L) ≈ m_∞ + A L^{-p}` from its
/// successive differences. Each difference is attributed to the geometric
/// mean of its endpoints; exact for geometric ladders.
pub fn successive_difference_rate(ladder: &[(f64, f64)]) -> Result<RateFit> {
    if ladder.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "rate fit needs at least 3 ladder points (got {})",
            ladder.len()
        )));
    }
    let mut pts = Vec::new();
    let mut diffs = Vec::new();
    for w in ladder.windows(2) {
        let d = (w[1].1 - w[0].1).abs();
        diffs.push(d);
        if d > 0.0 {
            let lm = (w[0].0 * w[1].0).sqrt();
            // d ≈ A p L^{-p-1} ΔL; divide out the ladder step
            let step = (w[1].0 - w[0].0).abs() / lm;
            pts.push((lm.ln(), (d / step).ln()));
        }
    }
    if pts.len() < 2 {
        return Ok(RateFit { rate: f64::INFINITY, residual: 0.0, differences: diffs });
    }
    let (slope, _, residual) = linear_fit(&pts)?;
    Ok(RateFit { rate: -slope, residual, differences: diffs })
}

/// Order of convergence of errors `e(h) ≈ C h^p` from `(h, e)` pairs.
pub fn error_order(pts: &[(f64, f64)]) -> Result<f64> {
    let logs: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).map(|&(h, e)| (h.ln(), e.ln())).collect();
    if logs.len() < 2 {
        return Err(Error::DegenerateFit("need two nonzero errors".into()));
    }
    Ok(linear_fit(&logs)?.0)
}

/// Log–log slope of `y` against `x` for positive data.
pub fn loglog_slope(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    let logs: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|&(x, y)| (x.ln(), y.ln())).collect();
    let (a, _, r) = linear_fit(&logs)?;
    Ok((a, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub residual: f64,
    pub differences: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_known_sample() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((m.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_sample_has_zero_variance() {
        let m = Moments::of(&[0.1; 40]);
        assert_eq!(m.variance, 0.0);
    }

    #[test]
    fn rate_of_power_law() {
        let ladder: Vec<_> = [8.0, 16.0, 32.0, 64.0].iter().map(|&l: &f64| (l, 3.0 + 2.0 / l)).collect();
        let r = successive_difference_rate(&ladder).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-10, "{}", r.rate);
    }

    #[test]
    fn f_test_detects_large_ratio() {
        let a = Moments { count: 50, mean: 0.0, variance: 4.0, std_error: 0.0 };
        let b = Moments { count: 50, mean: 0.0, variance: 1.0, std_error: 0.0 };
        assert!(variance_decrease_p_value(&a, &b).unwrap() < 1e-4);
        assert!(variance_decrease_p_value(&b, &a).unwrap() > 0.99);
    }

    #[test]
    fn error_order_recovers_exponent() {
        let pts: Vec<_> = [0.5, 0.25, 0.125].iter().map(|&h: &f64| (h, 3.0 * h * h)).collect();
        assert!((error_order(&pts).unwrap() - 2.0).abs() < 1e-12);
    }
}
