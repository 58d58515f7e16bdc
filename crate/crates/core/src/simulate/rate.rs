//! Convergence-rate experiments: error against `n` on log-log axes.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Statistic};
use super::fit::{linear_fit, LinearFit};
use super::runner::{map_replications, statistic_of, RunOptions};
use crate::bandwidth::normalizer;
use crate::error::{contract, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    pub mean_error: f64,
    /// Standard error of `mean_error` over replications.
    pub stderr: f64,
    pub rmse: f64,
    /// Delta-method standard error of `rmse`.
    pub rmse_stderr: f64,
    /// `B_n * rmse`; flat in `n` when the rate is right.
    pub normalized_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub beta: f64,
    pub dim: usize,
    pub statistic: Statistic,
    pub replications: usize,
    pub base_seed: u64,
    pub bandwidth_exponent: f64,
    pub rows: Vec<RateRow>,
    /// Least-squares fit of `ln rmse` on `ln n`.
    pub fit: LinearFit,
    /// `-beta / (2 beta + d)`.
    pub theoretical_slope: f64,
    pub slope_tolerance: f64,
    pub within_window: bool,
    /// `log10(n_max / n_min)`.
    pub span_decades: f64,
    /// The n values span less than two decades, so the slope is less certain.
    pub short_span: bool,
}

impl RateReport {
    /// `n,mean_error,stderr,rmse,rmse_stderr` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,mean_error,stderr,rmse,rmse_stderr\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n, r.mean_error, r.stderr, r.rmse, r.rmse_stderr
            ));
        }
        out
    }
}

/// Theoretical log-log slope of the error.
pub fn theoretical_slope(beta: f64, dim: usize) -> f64 {
    -beta / (2.0 * beta + dim as f64)
}

/// Runs `M` trajectories to the largest `n` and measures the error against
/// the true density at every `n` in the config.
pub fn run_rate_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RateReport> {
    let setup = cfg.setup()?;
    let m = cfg.replications;
    let errors = opts.install(|| {
        map_replications(&setup, &cfg.n_values, m, cfg.base_seed, |_, _, v| {
            statistic_of(&setup, v, &setup.truth)
        })
    })??;
    let mf = m as f64;
    let rows: Vec<RateRow> = cfg
        .n_values
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let col: Vec<f64> = errors.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / mf;
            let var = col.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (mf - 1.0);
            let sq: Vec<f64> = col.iter().map(|e| e * e).collect();
            let mse = sq.iter().sum::<f64>() / mf;
            let var_sq = sq.iter().map(|s| (s - mse) * (s - mse)).sum::<f64>() / (mf - 1.0);
            let rmse = mse.sqrt();
            let b_n = normalizer(n, cfg.smoothness.beta, cfg.dim())?;
            Ok(RateRow {
                n,
                mean_error: mean,
                stderr: (var / mf).sqrt(),
                rmse,
                rmse_stderr: if rmse > 0.0 { (var_sq / mf).sqrt() / (2.0 * rmse) } else { 0.0 },
                normalized_rmse: b_n * rmse,
            })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.rmse.ln()).collect();
    let fit = linear_fit(&x, &y)
        .filter(|f| f.slope.is_finite())
        .ok_or_else(|| contract("rate fit is degenerate (zero error at some n?)"))?;
    let span_decades = (*cfg.n_values.last().unwrap() as f64 / cfg.n_values[0] as f64).log10();
    let theoretical = theoretical_slope(cfg.smoothness.beta, cfg.dim());
    let tol = cfg.acceptance.slope_tolerance;
    Ok(RateReport {
        beta: cfg.smoothness.beta,
        dim: cfg.dim(),
        statistic: cfg.statistic,
        replications: m,
        base_seed: cfg.base_seed,
        bandwidth_exponent: setup.schedule.exponent(),
        rows,
        within_window: (fit.slope - theoretical).abs() <= tol,
        fit,
        theoretical_slope: theoretical,
        slope_tolerance: tol,
        span_decades,
        short_span: span_decades < 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(exponent: Option<f64>) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_json(
            r#"{
            "density": {"family": "gaussian", "dim": 1},
            "smoothness": {"beta": 2.0},
            "kernel": {"family": "epanechnikov", "dim": 1},
            "grid": {"kind": "point", "x0": [0.0]},
            "n_values": [16, 64, 256, 1024, 4096],
            "replications": 40,
            "base_seed": 3,
            "target": "rate",
            "statistic": {"kind": "pointwise"}
        }"#,
        )
        .unwrap();
        c.bandwidth.exponent = exponent;
        c
    }

    #[test]
    fn error_decreases_and_csv_shape() {
        let r = run_rate_experiment(&cfg(None), &RunOptions::default()).unwrap();
        assert!(r.fit.slope < -0.2, "slope {}", r.fit.slope);
        assert_eq!(r.theoretical_slope, -0.4);
        let csv = r.to_csv();
        assert!(csv.starts_with("n,mean_error,stderr,rmse,rmse_stderr\n16,"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = run_rate_experiment(&cfg(None), &RunOptions::with_workers(1)).unwrap();
        let b = run_rate_experiment(&cfg(None), &RunOptions::with_workers(3)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a, b);
    }

    #[test]
    fn undersmoothing_schedule_is_slower() {
        let good = run_rate_experiment(&cfg(None), &RunOptions::default()).unwrap();
        let bad = run_rate_experiment(&cfg(Some(0.9)), &RunOptions::default()).unwrap();
        assert!(bad.fit.slope > good.fit.slope);
    }
}
