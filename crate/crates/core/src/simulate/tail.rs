//! Empirical exceedance curves of the normalized deviation, exponent fits,
//! and calibration of the tail constant.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::config::{Center, ExperimentConfig, Statistic, TailSettings};
use super::fit::{linear_fit, wilson_interval, Z95};
use super::rng::replication_rng;
use super::runner::{map_replications, mean_values, statistic_of, RunOptions};
use crate::bandwidth::normalizer;
use crate::error::{contract, Result};
use crate::theory::TailModel;

/// Below this many points in the fit window the exponent is flagged.
pub const MIN_RELIABLE_POINTS: usize = 5;

/// Replication count below which tail resolution is flagged as poor.
pub const RECOMMENDED_REPLICATIONS: usize = 10_000;

/// Slope of `ln(-ln P)` against `ln u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
    pub u_lo: f64,
    pub u_hi: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    /// Sample size; absent for synthetic curves.
    pub n: Option<u64>,
    pub replications: usize,
    pub normalizer: Option<f64>,
    pub regime_m: Option<f64>,
    pub u: Vec<f64>,
    /// Fraction of replications with deviation strictly above `u`.
    pub p_hat: Vec<f64>,
    pub wilson_lo: Vec<f64>,
    pub wilson_hi: Vec<f64>,
    pub max_deviation: f64,
    /// Fit over the window `P in [min_exceedances / M, window_hi]`.
    pub fit: Option<ExponentFit>,
    /// Fit over `u in [a m, b m]` (moderate deviations).
    pub local_fit: Option<ExponentFit>,
    /// Normalized distance between the replication mean and the truth.
    pub c3_offset: Option<f64>,
    /// Fitted exponent reliable and within tolerance of `q*`.
    pub within_window: bool,
}

impl TailCurve {
    /// Builds the curve on a log-spaced grid from a tenth of the median
    /// deviation up to `max(max deviation, m)`, and fits both exponents.
    pub fn from_deviations(deviations: &[f64], settings: &TailSettings, regime_m: Option<f64>) -> Result<Self> {
        if deviations.is_empty() {
            return Err(contract("tail curve needs at least one deviation"));
        }
        if let Some(bad) = deviations.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(contract(format!("deviation {bad} is not a nonnegative number")));
        }
        let mut sorted = deviations.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m_count = sorted.len();
        let max_dev = sorted[m_count - 1];
        let median = sorted[m_count / 2];
        let smallest_positive = sorted.iter().copied().find(|d| *d > 0.0);
        let lo = if median > 0.0 {
            0.1 * median
        } else {
            smallest_positive.unwrap_or(1e-3)
        };
        let hi = max_dev.max(regime_m.unwrap_or(0.0)).max(lo * 10.0);
        let k = settings.u_points;
        let (llo, lhi) = (lo.ln(), hi.ln());
        let u: Vec<f64> = (0..k)
            .map(|i| (llo + (lhi - llo) * i as f64 / (k - 1) as f64).exp())
            .collect();
        let trials = m_count as u64;
        let mut p_hat = Vec::with_capacity(k);
        let mut wilson_lo = Vec::with_capacity(k);
        let mut wilson_hi = Vec::with_capacity(k);
        for &t in &u {
            let above = (m_count - sorted.partition_point(|d| *d <= t)) as u64;
            let (a, b) = wilson_interval(above, trials, Z95);
            p_hat.push(above as f64 / m_count as f64);
            wilson_lo.push(a);
            wilson_hi.push(b);
        }
        let mut curve = Self {
            n: None,
            replications: m_count,
            normalizer: None,
            regime_m,
            u,
            p_hat,
            wilson_lo,
            wilson_hi,
            max_deviation: max_dev,
            fit: None,
            local_fit: None,
            c3_offset: None,
            within_window: false,
        };
        let p_floor = settings.min_exceedances / m_count as f64;
        curve.fit = fit_tail_exponent(&curve, p_floor, settings.window_hi);
        curve.local_fit = regime_m.and_then(|m| {
            fit_over(
                &curve,
                |u, p| u >= settings.regime_window.0 * m && u <= settings.regime_window.1 * m && p >= p_floor,
            )
        });
        Ok(curve)
    }

    /// `u,p_hat,wilson_lo,wilson_hi` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,p_hat,wilson_lo,wilson_hi\n");
        for i in 0..self.u.len() {
            out.push_str(&format!("{},{},{},{}\n", self.u[i], self.p_hat[i], self.wilson_lo[i], self.wilson_hi[i]));
        }
        out
    }
}

fn fit_over(curve: &TailCurve, keep: impl Fn(f64, f64) -> bool) -> Option<ExponentFit> {
    let (mut x, mut y, mut used) = (Vec::new(), Vec::new(), Vec::new());
    for (&u, &p) in curve.u.iter().zip(&curve.p_hat) {
        if p > 0.0 && p < 1.0 && keep(u, p) {
            x.push(u.ln());
            y.push((-p.ln()).ln());
            used.push(u);
        }
    }
    let f = linear_fit(&x, &y)?;
    Some(ExponentFit {
        exponent: f.slope,
        stderr: f.slope_stderr,
        intercept: f.intercept,
        points: f.points,
        u_lo: used[0],
        u_hi: used[used.len() - 1],
        reliable: f.points >= MIN_RELIABLE_POINTS,
    })
}

/// Regresses `ln(-ln P)` on `ln u` over the points with `P in [p_lo, p_hi]`.
/// `None` with fewer than two usable points; `reliable` is false below
/// [`MIN_RELIABLE_POINTS`].
pub fn fit_tail_exponent(curve: &TailCurve, p_lo: f64, p_hi: f64) -> Option<ExponentFit> {
    fit_over(curve, |_, p| p >= p_lo && p <= p_hi)
}

/// Deviations with `P(D > u) = exp(-u^exponent)` exactly (`D = E^{1/exponent}`
/// with `E` standard exponential).
pub fn synthetic_deviations(exponent: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = replication_rng(seed, 0);
    (0..count)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            e.powf(1.0 / exponent)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Largest `C4` with `2 exp(-C4 u^{q*}) >= wilson_hi(u)` on the whole curve.
    pub c4: f64,
    /// Threshold at which the constraint binds; absent when saturated.
    pub binding_u: Option<f64>,
    /// Every constraint was vacuous, so the configured maximum was returned.
    pub saturated: bool,
    /// Post-hoc check that the bound at `c4` dominates every point.
    pub dominates: bool,
    /// No positive constant dominates the curve.
    pub falsified: bool,
}

fn dominates(curve: &TailCurve, qstar: f64, c: f64) -> bool {
    curve
        .u
        .iter()
        .zip(&curve.wilson_hi)
        .all(|(u, hi)| 2.0 * (-c * u.powf(qstar)).exp() >= *hi)
}

/// Bisection (to `1e-4` relative) for the largest `C4` whose bound
/// `2 exp(-C4 u^{q*})` stays above the upper Wilson limit at every `u`.
pub fn calibrate_constant(curve: &TailCurve, tm: &TailModel, max: f64) -> Result<Calibration> {
    if curve.u.is_empty() {
        return Err(contract("cannot calibrate on an empty curve"));
    }
    if !(max > 0.0 && max.is_finite()) {
        return Err(contract("calibration maximum must be positive and finite"));
    }
    let qs = tm.exponent_qstar();
    if dominates(curve, qs, max) {
        return Ok(Calibration {
            c4: max,
            binding_u: None,
            saturated: true,
            dominates: true,
            falsified: false,
        });
    }
    let (mut lo, mut hi) = (0.0, max);
    if !dominates(curve, qs, lo) {
        return Ok(Calibration {
            c4: 0.0,
            binding_u: None,
            saturated: false,
            dominates: false,
            falsified: true,
        });
    }
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if dominates(curve, qs, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let binding_u = curve
        .u
        .iter()
        .zip(&curve.wilson_hi)
        .filter(|(_, h)| **h > 0.0)
        .map(|(u, h)| (*u, (2.0 / h).ln() / u.powf(qs)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(u, _)| u);
    let ok = dominates(curve, qs, lo);
    Ok(Calibration {
        c4: lo,
        binding_u,
        saturated: false,
        dominates: ok,
        falsified: !(lo > 0.0) || !ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub beta: f64,
    pub dim: usize,
    pub statistic: Statistic,
    pub center: Center,
    pub replications: usize,
    pub base_seed: u64,
    /// `(2 beta + d) / (beta + d)`.
    pub theoretical_exponent: f64,
    pub exponent_tolerance: f64,
    /// Fewer than [`RECOMMENDED_REPLICATIONS`] replications.
    pub low_resolution: bool,
    pub curves: Vec<TailCurve>,
}

impl TailReport {
    pub fn curve(&self, n: u64) -> Option<&TailCurve> {
        self.curves.iter().find(|c| c.n == Some(n))
    }

    /// All curves stacked, with a leading `n` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,u,p_hat,wilson_lo,wilson_hi\n");
        for c in &self.curves {
            let n = c.n.unwrap_or(0);
            for i in 0..c.u.len() {
                out.push_str(&format!("{n},{},{},{},{}\n", c.u[i], c.p_hat[i], c.wilson_lo[i], c.wilson_hi[i]));
            }
        }
        out
    }
}

type Deviations = (Vec<Vec<f64>>, Vec<Option<f64>>);

/// Normalized deviations `B_n * stat(f_n - center)` per replication,
/// `[checkpoint][replication]`, and the normalized bias offsets.
fn normalized_deviations(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Deviations> {
    let setup = cfg.setup()?;
    let m = cfg.replications;
    let ns = &cfg.n_values;
    let b: Vec<f64> = ns
        .iter()
        .map(|&n| normalizer(n, cfg.smoothness.beta, cfg.dim()))
        .collect::<Result<_>>()?;
    let transpose = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..ns.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
    };
    opts.install(|| {
        if setup.grid.len() == 1 {
            let values = transpose(map_replications(&setup, ns, m, cfg.base_seed, |_, _, v| v[0])?);
            let truth = setup.truth[0];
            let mut devs = Vec::with_capacity(ns.len());
            let mut offsets = Vec::with_capacity(ns.len());
            for (j, col) in values.iter().enumerate() {
                let mean = col.iter().sum::<f64>() / m as f64;
                let center = match cfg.center {
                    Center::ReplicationMean => mean,
                    Center::Truth => truth,
                };
                devs.push(col.iter().map(|v| b[j] * (v - center).abs()).collect());
                offsets.push(Some(b[j] * (mean - truth).abs()));
            }
            Ok((devs, offsets))
        } else {
            let means = match cfg.center {
                Center::ReplicationMean => Some(mean_values(&setup, ns, m, cfg.base_seed)?),
                Center::Truth => None,
            };
            let rows = map_replications(&setup, ns, m, cfg.base_seed, |_, j, v| {
                let center = means.as_ref().map_or(&setup.truth, |mv| &mv[j]);
                b[j] * statistic_of(&setup, v, center)
            })?;
            let offsets = (0..ns.len())
                .map(|j| means.as_ref().map(|mv| b[j] * statistic_of(&setup, &mv[j], &setup.truth)))
                .collect();
            Ok((transpose(rows), offsets))
        }
    })?
}

/// Exceedance curves of the normalized deviation at every configured `n`,
/// all observed along the same `M` trajectories.
pub fn run_tail_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<TailReport> {
    let tm = cfg.tail_model()?;
    let (devs, offsets) = normalized_deviations(cfg, opts)?;
    let qstar = tm.exponent_qstar();
    let tol = cfg.acceptance.exponent_tolerance;
    let curves = cfg
        .n_values
        .iter()
        .zip(devs)
        .zip(offsets)
        .map(|((&n, d), offset)| {
            let mut c = TailCurve::from_deviations(&d, &cfg.tail, Some(tm.regime_m(n)?))?;
            c.n = Some(n);
            c.normalizer = Some(normalizer(n, cfg.smoothness.beta, cfg.dim())?);
            c.c3_offset = offset;
            c.within_window = c.fit.is_some_and(|f| f.reliable && (f.exponent - qstar).abs() <= tol);
            Ok(c)
        })
        .collect::<Result<_>>()?;
    Ok(TailReport {
        beta: cfg.smoothness.beta,
        dim: cfg.dim(),
        statistic: cfg.statistic,
        center: cfg.center,
        replications: cfg.replications,
        base_seed: cfg.base_seed,
        theoretical_exponent: qstar,
        exponent_tolerance: tol,
        low_resolution: cfg.replications < RECOMMENDED_REPLICATIONS,
        curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub tail: TailReport,
    /// One calibration per curve, in `n` order.
    pub per_curve: Vec<Calibration>,
    /// Smallest calibrated constant over `n` (the bound is uniform in `n`).
    pub c4: f64,
    pub falsified: bool,
}

/// Tail experiment followed by calibration of `C4` on every curve.
pub fn run_calibration(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CalibrationReport> {
    let tail = run_tail_experiment(cfg, opts)?;
    let tm = cfg.tail_model()?;
    let per_curve: Vec<Calibration> = tail
        .curves
        .iter()
        .map(|c| calibrate_constant(c, &tm, cfg.tail.calibrate_max))
        .collect::<Result<_>>()?;
    let c4 = per_curve.iter().map(|c| c.c4).fold(f64::INFINITY, f64::min);
    let falsified = per_curve.iter().any(|c| c.falsified);
    Ok(CalibrationReport {
        tail,
        per_curve,
        c4,
        falsified,
    })
}
