//! Least-squares line fits and binomial confidence intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical OLS standard error of the slope; NaN with fewer than 3 points.
    pub slope_stderr: f64,
    pub points: usize,
}

/// Ordinary least squares `y = intercept + slope x`. `None` for fewer than
/// two points or a degenerate `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x[..n]
            .iter()
            .zip(&y[..n])
            .map(|(a, b)| {
                let r = b - intercept - slope * a;
                r * r
            })
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr,
        points: n,
    })
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes >= trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-14);
        assert!((f.intercept - 0.5).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn slope_stderr_hand_value() {
        // residuals (+1, -2, +1) around y = x: rss = 6, sxx = 2
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, -1.0, 3.0]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14);
        assert!((f.slope_stderr - (6.0f64 / 1.0 / 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(10, 100, Z95);
        assert!(lo < 0.1 && 0.1 < hi);
        // reference values for 10/100 at 95%
        assert!((lo - 0.055_229).abs() < 1e-5);
        assert!((hi - 0.174_366).abs() < 1e-5);
        let (lo, hi) = wilson_interval(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.004);
    }
}
