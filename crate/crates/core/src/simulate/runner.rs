//! Replication engine: one seeded trajectory per replication, observed at
//! nested checkpoints, run in parallel and merged by replication index.

use rayon::prelude::*;

use super::config::{Setup, Statistic};
use super::rng::{replication_rng, replication_seed};
use crate::error::{Error, Result};
use crate::estimator::EstimatorState;
use crate::metrics::lp_norm;

/// Replications handled by one task in chunked reductions. Fixed, so sums
/// do not depend on the number of workers.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` lets rayon decide.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self { workers: Some(workers) }
    }

    /// Reads the default worker count from `WWKDE_WORKERS`.
    pub fn from_env() -> Self {
        Self {
            workers: std::env::var("WWKDE_WORKERS")
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .filter(|w: &usize| *w > 0),
        }
    }

    pub(crate) fn install<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            builder = builder.num_threads(w);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(job))
    }
}

/// Runs replication `index` up to the last checkpoint, calling `visit` with
/// the checkpoint position and the current grid values.
pub(crate) fn run_trajectory(
    setup: &Setup,
    bandwidths: &[f64],
    checkpoints: &[u64],
    base_seed: u64,
    index: usize,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let mut rng = replication_rng(base_seed, index);
    let mut state = EstimatorState::new(setup.grid.clone(), setup.kernel.clone(), setup.schedule)?;
    let mut xi = vec![0.0; setup.grid.dim()];
    let mut next = 0;
    for (k, &h) in bandwidths.iter().enumerate() {
        setup.density.sample_into(&mut rng, &mut xi);
        state.advance(&xi, h);
        if next < checkpoints.len() && (k + 1) as u64 == checkpoints[next] {
            if state.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::Replication {
                    replication: index,
                    seed: replication_seed(base_seed, index),
                });
            }
            visit(next, state.values());
            next += 1;
        }
    }
    Ok(())
}

/// `f(replication, checkpoint, values)` for every replication, returned as
/// `[replication][checkpoint]` in index order.
pub(crate) fn map_replications<T, F>(
    setup: &Setup,
    checkpoints: &[u64],
    replications: usize,
    base_seed: u64,
    f: F,
) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(usize, usize, &[f64]) -> T + Sync,
{
    let bandwidths = setup.schedule.table(*checkpoints.last().unwrap_or(&0));
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity(checkpoints.len());
            run_trajectory(setup, &bandwidths, checkpoints, base_seed, r, |j, v| out.push(f(r, j, v)))?;
            Ok(out)
        })
        .collect()
}

/// Replication mean of the grid values at each checkpoint, `[checkpoint][point]`.
pub(crate) fn mean_values(
    setup: &Setup,
    checkpoints: &[u64],
    replications: usize,
    base_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let bandwidths = setup.schedule.table(*checkpoints.last().unwrap_or(&0));
    let g = setup.grid.len();
    let chunks: Vec<Vec<Vec<f64>>> = (0..replications.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sums = vec![vec![0.0; g]; checkpoints.len()];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replications) {
                run_trajectory(setup, &bandwidths, checkpoints, base_seed, r, |j, v| {
                    for (s, x) in sums[j].iter_mut().zip(v) {
                        *s += x;
                    }
                })?;
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![vec![0.0; g]; checkpoints.len()];
    for chunk in &chunks {
        for (t, s) in total.iter_mut().zip(chunk) {
            for (a, b) in t.iter_mut().zip(s) {
                *a += b;
            }
        }
    }
    let m = replications as f64;
    for t in &mut total {
        for a in t.iter_mut() {
            *a /= m;
        }
    }
    Ok(total)
}

/// The configured statistic of `values - center` (unnormalized).
pub(crate) fn statistic_of(setup: &Setup, values: &[f64], center: &[f64]) -> f64 {
    match setup.statistic {
        Statistic::Pointwise => (values[0] - center[0]).abs(),
        Statistic::Sup | Statistic::Lp { .. } => {
            let diff: Vec<f64> = values.iter().zip(center).map(|(a, b)| a - b).collect();
            lp_norm(&diff, setup.grid.weights(), setup.norm).expect("grid weights are validated")
        }
    }
}
