//! The recursive Wolverton–Wagner estimator on a fixed evaluation grid.
//!
//! After `n` observations the estimate at `x` is
//!
//! ```text
//! f_n(x) = (1/n) sum_{k=1}^n h_k^{-d} K((x - xi_k) / h_k)
//!        = ((n-1)/n) f_{n-1}(x) + (1/(n h_n^d)) K((x - xi_n) / h_n),
//! ```
//!
//! so [`EstimatorState::update`] touches every grid point once per sample and
//! never stores the sample. [`ww_batch`] evaluates the direct sum and serves
//! as the oracle for the recursion; [`pr_batch`] is the classical estimator
//! with one bandwidth shared by all samples.

use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthSchedule;
use crate::error::{check_dim, contract, Error, Result};
use crate::kernel::KernelSpec;

/// How the cell weights of a box grid are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Weights sum to one (uniform probability on the box).
    #[default]
    Probability,
    /// Weights are cell volumes (Lebesgue measure on the box).
    Lebesgue,
}

/// Finite set of query points with quadrature weights, realising a
/// discrete measure on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    dim: usize,
    /// Row-major, `dim` coordinates per point.
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl EvaluationGrid {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(contract("grid dimension must be positive"));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(contract("point buffer length is not a multiple of the dimension"));
        }
        let count = points.len() / dim;
        if weights.len() != count {
            return Err(contract(format!(
                "{} weights for {count} points",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(contract(format!("grid weight {w} is not a nonnegative finite number")));
        }
        if let Some(x) = points.iter().find(|x| !x.is_finite()) {
            return Err(contract(format!("grid coordinate {x} is not finite")));
        }
        let grid = Self { dim, points, weights };
        grid.check_distinct()?;
        Ok(grid)
    }

    fn check_distinct(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for pair in order.windows(2) {
            if self.point(pair[0]) == self.point(pair[1]) {
                return Err(contract(format!("duplicate grid point {:?}", self.point(pair[0]))));
            }
        }
        Ok(())
    }

    /// Midpoint grid on the box `prod [lo_i, hi_i]` with `per_axis` cells per
    /// axis; weights are cell volumes or their normalized version.
    pub fn uniform_box(lo: &[f64], hi: &[f64], per_axis: usize, measure: Measure) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(contract("box bounds must be nonempty and of equal length"));
        }
        if per_axis == 0 {
            return Err(contract("a box grid needs at least one cell per axis"));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(contract("box lower bounds must be below upper bounds"));
        }
        let dim = lo.len();
        let steps: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / per_axis as f64).collect();
        let count = per_axis.pow(dim as u32);
        let volume: f64 = steps.iter().product();
        let weight = match measure {
            Measure::Probability => 1.0 / count as f64,
            Measure::Lebesgue => volume,
        };
        let mut points = Vec::with_capacity(count * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..count {
            for axis in 0..dim {
                points.push(lo[axis] + (idx[axis] as f64 + 0.5) * steps[axis]);
            }
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < per_axis {
                    break;
                }
                *slot = 0;
            }
        }
        Self::new(dim, points, vec![weight; count])
    }

    /// Unit mass at a single point.
    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec(), vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Streaming estimator state: the current estimate at every grid point.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    n: u64,
    values: Vec<f64>,
    grid: EvaluationGrid,
    kernel: KernelSpec,
    schedule: BandwidthSchedule,
    scratch: Vec<f64>,
}

impl EstimatorState {
    /// Empty state (`n = 0`, all values zero).
    pub fn new(grid: EvaluationGrid, kernel: KernelSpec, schedule: BandwidthSchedule) -> Result<Self> {
        check_dim(kernel.dim(), grid.dim())?;
        check_dim(kernel.dim(), schedule.dim)?;
        schedule.validate()?;
        let dim = grid.dim();
        Ok(Self {
            n: 0,
            values: vec![0.0; grid.len()],
            grid,
            kernel,
            schedule,
            scratch: vec![0.0; dim],
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &EvaluationGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn schedule(&self) -> &BandwidthSchedule {
        &self.schedule
    }

    /// Folds in one observation. A rejected sample leaves the state untouched.
    pub fn update(&mut self, xi: &[f64]) -> Result<()> {
        check_dim(self.grid.dim(), xi.len())?;
        if let Some(&bad) = xi.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: xi.to_vec(),
                value: bad,
            });
        }
        self.update_unchecked(xi);
        Ok(())
    }

    #[inline]
    pub(crate) fn update_unchecked(&mut self, xi: &[f64]) {
        let n = self.n + 1;
        let h = self.schedule.at_unchecked(n);
        self.advance(xi, h);
    }

    /// Recursion step with a precomputed `h_n` (used by the simulation loops,
    /// which tabulate the schedule once).
    #[inline]
    pub(crate) fn advance(&mut self, xi: &[f64], h: f64) {
        let n = self.n + 1;
        let nf = n as f64;
        let keep = (nf - 1.0) / nf;
        let gain = 1.0 / (nf * h.powi(self.grid.dim() as i32));
        let Self {
            values,
            grid,
            kernel,
            scratch,
            ..
        } = self;
        for (value, x) in values.iter_mut().zip(grid.points()) {
            let k = kernel.value_scaled(x, xi, h, scratch);
            *value = keep * *value + gain * k;
        }
        self.n = n;
    }

    /// Folds in samples in order, stopping at the first rejected one.
    pub fn extend<'a, I: IntoIterator<Item = &'a [f64]>>(&mut self, samples: I) -> Result<()> {
        for xi in samples {
            self.update(xi)?;
        }
        Ok(())
    }
}

/// Creates an empty estimator; see [`EstimatorState::new`].
pub fn ww_init(grid: EvaluationGrid, kernel: KernelSpec, schedule: BandwidthSchedule) -> Result<EstimatorState> {
    EstimatorState::new(grid, kernel, schedule)
}

fn check_samples(samples: &[Vec<f64>], dim: usize) -> Result<()> {
    for s in samples {
        check_dim(dim, s.len())?;
        if let Some(&bad) = s.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: s.clone(),
                value: bad,
            });
        }
    }
    Ok(())
}

/// Direct sum `(1/n) sum_k h_k^{-d} K((x - xi_k)/h_k)` at every grid point.
/// An empty sample list yields zeros.
pub fn ww_batch(
    samples: &[Vec<f64>],
    grid: &EvaluationGrid,
    kernel: &KernelSpec,
    schedule: &BandwidthSchedule,
) -> Result<Vec<f64>> {
    check_dim(kernel.dim(), grid.dim())?;
    check_samples(samples, grid.dim())?;
    if samples.is_empty() {
        return Ok(vec![0.0; grid.len()]);
    }
    let d = grid.dim() as i32;
    let n = samples.len() as f64;
    let bandwidths: Vec<f64> = (1..=samples.len() as u64)
        .map(|k| schedule.at_unchecked(k))
        .collect();
    let mut u = vec![0.0; grid.dim()];
    Ok(grid
        .points()
        .map(|x| {
            let sum: f64 = samples
                .iter()
                .zip(&bandwidths)
                .map(|(xi, &h)| {
                    for ((ui, a), b) in u.iter_mut().zip(x).zip(xi) {
                        *ui = (a - b) / h;
                    }
                    kernel.value(&u) / h.powi(d)
                })
                .sum();
            sum / n
        })
        .collect())
}

/// Parzen–Rosenblatt estimate `(1/(n h^d)) sum_k K((x - xi_k)/h)`.
pub fn pr_batch(
    samples: &[Vec<f64>],
    grid: &EvaluationGrid,
    kernel: &KernelSpec,
    bandwidth: f64,
) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(contract("Parzen-Rosenblatt bandwidth must be positive"));
    }
    check_dim(kernel.dim(), grid.dim())?;
    check_samples(samples, grid.dim())?;
    if samples.is_empty() {
        return Ok(vec![0.0; grid.len()]);
    }
    let scale = 1.0 / (samples.len() as f64 * bandwidth.powi(grid.dim() as i32));
    let mut u = vec![0.0; grid.dim()];
    Ok(grid
        .points()
        .map(|x| {
            let sum: f64 = samples
                .iter()
                .map(|xi| {
                    for ((ui, a), b) in u.iter_mut().zip(x).zip(xi) {
                        *ui = (a - b) / bandwidth;
                    }
                    kernel.value(&u)
                })
                .sum();
            sum * scale
        })
        .collect())
}

/// Optional post-processing: clips negative values at zero and rescales so
/// the weighted mass is unchanged. Returns the input unchanged if nothing
/// positive remains.
pub fn clip_and_renormalize(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mass: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let clipped_mass: f64 = clipped.iter().zip(weights).map(|(v, w)| v * w).sum();
    if clipped_mass <= 0.0 || mass <= 0.0 {
        return values.to_vec();
    }
    let scale = mass / clipped_mass;
    clipped.into_iter().map(|v| v * scale).collect()
}

/// `max_i |a_i - b_i| / max(|a_i|, |b_i|)`, with `0/0` read as zero.
pub fn max_relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale.max(f64::MIN_POSITIVE)
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::build_orthogonal_kernel;

    fn line(points: &[f64]) -> EvaluationGrid {
        EvaluationGrid::new(1, points.to_vec(), vec![1.0 / points.len() as f64; points.len()]).unwrap()
    }

    #[test]
    fn init_is_empty() {
        let st = ww_init(
            line(&[-1.0, 0.0, 1.0]),
            KernelSpec::gaussian(1),
            BandwidthSchedule::optimal(1.0, 1),
        )
        .unwrap();
        assert_eq!(st.n(), 0);
        assert_eq!(st.values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn init_rejects_dimension_mismatch() {
        let err = ww_init(
            line(&[0.0]),
            KernelSpec::gaussian(2),
            BandwidthSchedule::optimal(1.0, 2),
        )
        .unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn first_update_is_kernel_peak() {
        let mut st = ww_init(
            line(&[0.0]),
            KernelSpec::gaussian(1),
            BandwidthSchedule::optimal(1.0, 1),
        )
        .unwrap();
        st.update(&[0.0]).unwrap();
        assert_eq!(st.n(), 1);
        assert!((st.values()[0] - 0.398_942_3).abs() < 1e-7);
    }

    #[test]
    fn far_sample_only_rescales() {
        let mut st = ww_init(
            line(&[-0.5, 0.0, 0.25]),
            KernelSpec::epanechnikov(1),
            BandwidthSchedule::optimal(1.0, 1),
        )
        .unwrap();
        st.update(&[0.1]).unwrap();
        st.update(&[-0.2]).unwrap();
        let before = st.values().to_vec();
        st.update(&[50.0]).unwrap();
        for (a, b) in st.values().iter().zip(&before) {
            assert_eq!(*a, b * (2.0 / 3.0));
        }
    }

    #[test]
    fn rejected_sample_leaves_state_unchanged() {
        let mut st = ww_init(
            line(&[0.0, 1.0]),
            KernelSpec::gaussian(1),
            BandwidthSchedule::optimal(1.0, 1),
        )
        .unwrap();
        st.update(&[0.3]).unwrap();
        let snapshot = st.values().to_vec();
        assert!(matches!(st.update(&[f64::NAN]), Err(Error::NonFinite { .. })));
        assert!(st.update(&[0.0, 1.0]).is_err());
        assert_eq!(st.n(), 1);
        assert_eq!(st.values(), snapshot.as_slice());
    }

    #[test]
    fn three_sample_hand_sum() {
        // h_k = k^{-1/3}; samples 0.1, -0.3, 0.2; evaluate at x = 0.
        let samples = vec![vec![0.1], vec![-0.3], vec![0.2]];
        let epan = |u: f64| if u.abs() <= 1.0 { 0.75 * (1.0 - u * u) } else { 0.0 };
        let mut want = 0.0;
        for (k, s) in samples.iter().enumerate() {
            let h = ((k + 1) as f64).powf(-1.0 / 3.0);
            want += epan((0.0 - s[0]) / h) / h;
        }
        want /= 3.0;
        let got = ww_batch(
            &samples,
            &line(&[0.0]),
            &KernelSpec::epanechnikov(1),
            &BandwidthSchedule::optimal(1.0, 1),
        )
        .unwrap();
        assert!((got[0] - want).abs() < 1e-15);
        // arithmetic: 0.7425, 0.75(1 - 0.09*2^{2/3}) 2^{1/3}, 0.75(1 - 0.04*3^{2/3}) 3^{1/3}
        let hand = (0.7425
            + 0.75 * (1.0 - 0.09 * 2f64.powf(2.0 / 3.0)) * 2f64.powf(1.0 / 3.0)
            + 0.75 * (1.0 - 0.04 * 3f64.powf(2.0 / 3.0)) * 3f64.powf(1.0 / 3.0))
            / 3.0;
        assert!((got[0] - hand).abs() < 1e-14);
    }

    #[test]
    fn batch_of_nothing_is_zero() {
        let got = ww_batch(
            &[],
            &line(&[0.0, 2.0]),
            &KernelSpec::gaussian(1),
            &BandwidthSchedule::optimal(1.0, 1),
        )
        .unwrap();
        assert_eq!(got, vec![0.0, 0.0]);
    }

    #[test]
    fn pr_single_sample_matches_ww() {
        let grid = line(&[-0.4, 0.0, 0.7]);
        let k = KernelSpec::gaussian(1);
        let s = BandwidthSchedule::optimal(1.0, 1).with_c2(0.6);
        let samples = vec![vec![0.25]];
        let ww = ww_batch(&samples, &grid, &k, &s).unwrap();
        let pr = pr_batch(&samples, &grid, &k, 0.6).unwrap();
        assert_eq!(ww, pr);
    }

    #[test]
    fn pr_identical_samples() {
        let samples = vec![vec![1.5]; 7];
        let pr = pr_batch(&samples, &line(&[1.5]), &KernelSpec::gaussian(1), 0.4).unwrap();
        assert!((pr[0] - 0.398_942_280_401_432_7 / 0.4).abs() < 1e-15);
        assert!(pr_batch(&samples, &line(&[1.5]), &KernelSpec::gaussian(1), 0.0).is_err());
    }

    #[test]
    fn mass_is_conserved_on_covering_grid() {
        let grid = EvaluationGrid::uniform_box(&[-3.0], &[3.0], 2000, Measure::Lebesgue).unwrap();
        let samples: Vec<Vec<f64>> = (0..40).map(|i| vec![-1.0 + 0.05 * i as f64]).collect();
        let v = ww_batch(
            &samples,
            &grid,
            &KernelSpec::epanechnikov(1),
            &BandwidthSchedule::optimal(1.0, 1),
        )
        .unwrap();
        let mass: f64 = v.iter().zip(grid.weights()).map(|(a, w)| a * w).sum();
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
        assert!(v.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn order_matters() {
        let grid = line(&[0.0, 0.5]);
        let k = KernelSpec::gaussian(1);
        let s = BandwidthSchedule::optimal(1.0, 1);
        let a = ww_batch(&[vec![0.0], vec![1.0]], &grid, &k, &s).unwrap();
        let b = ww_batch(&[vec![1.0], vec![0.0]], &grid, &k, &s).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn higher_order_estimates_are_not_clipped() {
        let grid = line(&[0.0, 0.9]);
        let mut st = ww_init(grid, build_orthogonal_kernel(1, 3).unwrap(), BandwidthSchedule::optimal(3.0, 1)).unwrap();
        st.update(&[0.0]).unwrap();
        // K(0.9) of the fourth-order kernel is negative
        assert!(st.values()[1] < 0.0);
        let clipped = clip_and_renormalize(st.values(), &[0.5, 0.5]);
        assert!(clipped.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn grid_constructors() {
        let g = EvaluationGrid::uniform_box(&[0.0, 0.0], &[1.0, 2.0], 4, Measure::Lebesgue).unwrap();
        assert_eq!(g.len(), 16);
        assert!((g.total_mass() - 2.0).abs() < 1e-14);
        assert_eq!(g.point(0), &[0.125, 0.25]);
        let g = EvaluationGrid::uniform_box(&[0.0], &[1.0], 10, Measure::Probability).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-14);
        let g = EvaluationGrid::dirac(&[0.3, 0.4]).unwrap();
        assert_eq!(g.len(), 1);
        assert!(EvaluationGrid::new(1, vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(EvaluationGrid::new(1, vec![0.0, 1.0], vec![0.5, -0.5]).is_err());
        assert!(EvaluationGrid::new(1, vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
