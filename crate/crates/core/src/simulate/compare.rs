//! Side-by-side checks: recursive versus classical variance, and the error
//! along a single long trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::TestDensity;
use super::rng::{replication_rng, replication_seed};
use super::runner::RunOptions;
use crate::bandwidth::BandwidthSchedule;
use crate::error::{contract, Error, Result};
use crate::estimator::{pr_batch, ww_batch, EstimatorState, EvaluationGrid};
use crate::kernel::KernelSpec;
use crate::metrics::{lp_norm, NormOrder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComparison {
    pub n: u64,
    pub replications: usize,
    pub point: Vec<f64>,
    /// Shared by the classical estimator: `h_n` of the schedule.
    pub pr_bandwidth: f64,
    pub ww_mean: f64,
    pub pr_mean: f64,
    pub ww_variance: f64,
    pub pr_variance: f64,
    /// Monte Carlo standard error of `ww_variance - pr_variance`.
    pub difference_stderr: f64,
    /// `ww_variance <= pr_variance + 2 * difference_stderr`.
    pub ww_not_larger: bool,
}

impl VarianceComparison {
    pub fn to_csv(&self) -> String {
        format!(
            "estimator,mean,variance\nww,{},{}\npr,{},{}\n",
            self.ww_mean, self.ww_variance, self.pr_mean, self.pr_variance
        )
    }
}

fn sample_variance(x: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    (mean, x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0))
}

/// Both estimators on the same `n` samples per replication, at one point.
/// The classical estimator uses `h_n` from `schedule` for every sample.
#[allow(clippy::too_many_arguments)]
pub fn compare_variance(
    density: &TestDensity,
    kernel: &KernelSpec,
    schedule: &BandwidthSchedule,
    point: &[f64],
    n: u64,
    replications: usize,
    base_seed: u64,
    opts: &RunOptions,
) -> Result<VarianceComparison> {
    if replications < 2 || n == 0 {
        return Err(contract("variance comparison needs n >= 1 and at least 2 replications"));
    }
    let grid = EvaluationGrid::dirac(point)?;
    let h_n = schedule.at(n)?;
    let pairs: Vec<(f64, f64)> = opts.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = replication_rng(base_seed, r);
                let samples = density.sample(&mut rng, n as usize);
                let ww = ww_batch(&samples, &grid, kernel, schedule)?[0];
                let pr = pr_batch(&samples, &grid, kernel, h_n)?[0];
                if !(ww.is_finite() && pr.is_finite()) {
                    return Err(Error::Replication {
                        replication: r,
                        seed: replication_seed(base_seed, r),
                    });
                }
                Ok((ww, pr))
            })
            .collect::<Result<_>>()
    })??;
    let ww: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let pr: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ww_mean, ww_variance) = sample_variance(&ww);
    let (pr_mean, pr_variance) = sample_variance(&pr);
    // per-replication contributions to the variance difference
    let terms: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| (a - ww_mean).powi(2) - (b - pr_mean).powi(2))
        .collect();
    let (_, term_var) = sample_variance(&terms);
    let difference_stderr = (term_var / replications as f64).sqrt();
    Ok(VarianceComparison {
        n,
        replications,
        point: point.to_vec(),
        pr_bandwidth: h_n,
        ww_mean,
        pr_mean,
        ww_variance,
        pr_variance,
        difference_stderr,
        ww_not_larger: ww_variance <= pr_variance + 2.0 * difference_stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCheck {
    pub checkpoints: Vec<u64>,
    /// `L2` error (Lebesgue weights of the grid) at each checkpoint.
    pub errors: Vec<f64>,
    /// Largest error over the last four checkpoints is below the smallest
    /// over the first two.
    pub trending_down: bool,
}

/// Follows one seeded trajectory and records the `L2` error at
/// `n = 2^first_power, 2^(first_power+1), ..., 2^last_power`.
pub fn trajectory_l2_check(
    density: &TestDensity,
    grid: &EvaluationGrid,
    kernel: &KernelSpec,
    schedule: &BandwidthSchedule,
    first_power: u32,
    last_power: u32,
    seed: u64,
) -> Result<TrajectoryCheck> {
    if last_power < first_power + 5 || last_power > 40 {
        return Err(contract("trajectory check needs at least six checkpoints and n <= 2^40"));
    }
    let truth: Vec<f64> = grid.points().map(|x| density.pdf(x)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = EstimatorState::new(grid.clone(), kernel.clone(), *schedule)?;
    let mut xi = vec![0.0; grid.dim()];
    let checkpoints: Vec<u64> = (first_power..=last_power).map(|p| 1u64 << p).collect();
    let mut errors = Vec::with_capacity(checkpoints.len());
    for &c in &checkpoints {
        while state.n() < c {
            density.sample_into(&mut rng, &mut xi);
            state.update(&xi)?;
        }
        let diff: Vec<f64> = state.values().iter().zip(&truth).map(|(a, b)| a - b).collect();
        errors.push(lp_norm(&diff, grid.weights(), NormOrder::Finite(2.0))?);
    }
    let late = errors[errors.len() - 4..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let early = errors[..2].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TrajectoryCheck {
        checkpoints,
        errors,
        trending_down: late < early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandwidth::SmoothnessClass;
    use crate::estimator::Measure;
    use crate::simulate::density::{make_test_density, DensitySpec};

    #[test]
    fn recursive_variance_is_not_larger() {
        let s = SmoothnessClass::new(1.0, 1.0).unwrap();
        let d = make_test_density(&DensitySpec::Triangular { dim: 1 }, s).unwrap();
        let k = KernelSpec::epanechnikov(1);
        let sch = BandwidthSchedule::optimal(1.0, 1);
        let c = compare_variance(&d, &k, &sch, &[0.0], 200, 200, 4, &RunOptions::default()).unwrap();
        assert!(c.ww_not_larger, "{c:?}");
        assert!(c.difference_stderr > 0.0);
    }

    #[test]
    fn single_trajectory_error_falls() {
        let s = SmoothnessClass::new(2.0, 1.0).unwrap();
        let d = make_test_density(&DensitySpec::Gaussian { dim: 1, mean: 0.0, sd: 1.0 }, s).unwrap();
        let grid = EvaluationGrid::uniform_box(&[-4.0], &[4.0], 64, Measure::Lebesgue).unwrap();
        let k = KernelSpec::epanechnikov(1);
        let sch = BandwidthSchedule::optimal(2.0, 1);
        let t = trajectory_l2_check(&d, &grid, &k, &sch, 4, 14, 8).unwrap();
        assert_eq!(t.checkpoints.len(), 11);
        assert!(t.trending_down, "{:?}", t.errors);
    }
}
