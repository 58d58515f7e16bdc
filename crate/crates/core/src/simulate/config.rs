//! JSON experiment configuration and its validated, ready-to-run form.

use serde::{Deserialize, Serialize};

use super::density::{make_test_density, DensitySpec, TestDensity};
use crate::bandwidth::{BandwidthSchedule, SmoothnessClass};
use crate::error::{Error, Result};
use crate::estimator::{EvaluationGrid, Measure};
use crate::kernel::{KernelConfig, KernelSpec};
use crate::metrics::NormOrder;
use crate::theory::TailModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConfig {
    pub beta: f64,
    #[serde(rename = "L", default = "one")]
    pub holder_const: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default)]
    pub gamma: f64,
    /// Overrides the optimal exponent `1/(2 beta + d)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            c2: 1.0,
            gamma: 0.0,
            exponent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridConfig {
    Point {
        x0: Vec<f64>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        points_per_axis: usize,
        #[serde(default)]
        measure: Measure,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Rate,
    Tail,
    Calibrate,
}

/// Error functional applied to `f_n - center` on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    Pointwise,
    Sup,
    Lp { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    /// Average over replications, standing in for `E f_n`.
    #[default]
    ReplicationMean,
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    #[serde(default = "one")]
    pub c4: f64,
    #[serde(default)]
    pub c3: f64,
    #[serde(default = "one")]
    pub c8: f64,
    #[serde(default = "one")]
    pub c14: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            c4: 1.0,
            c3: 0.0,
            c8: 1.0,
            c14: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSettings {
    /// Number of log-spaced thresholds.
    #[serde(default = "default_u_points")]
    pub u_points: usize,
    /// Lower end of the fit window is `min_exceedances / M`.
    #[serde(default = "default_min_exceedances")]
    pub min_exceedances: f64,
    /// Upper end of the fit window in probability.
    #[serde(default = "default_window_hi")]
    pub window_hi: f64,
    /// Regime window for the local fit, as fractions of `m(n)`.
    #[serde(default = "default_regime_window")]
    pub regime_window: (f64, f64),
    /// Returned by calibration when every constant dominates.
    #[serde(default = "default_calibrate_max")]
    pub calibrate_max: f64,
}

fn default_u_points() -> usize {
    200
}
fn default_min_exceedances() -> f64 {
    10.0
}
fn default_window_hi() -> f64 {
    0.2
}
fn default_regime_window() -> (f64, f64) {
    (0.2, 0.8)
}
fn default_calibrate_max() -> f64 {
    1e6
}

impl Default for TailSettings {
    fn default() -> Self {
        Self {
            u_points: default_u_points(),
            min_exceedances: default_min_exceedances(),
            window_hi: default_window_hi(),
            regime_window: default_regime_window(),
            calibrate_max: default_calibrate_max(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceConfig {
    #[serde(default = "default_slope_tol")]
    pub slope_tolerance: f64,
    #[serde(default = "default_exponent_tol")]
    pub exponent_tolerance: f64,
}

fn default_slope_tol() -> f64 {
    0.10
}
fn default_exponent_tol() -> f64 {
    0.35
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self {
            slope_tolerance: default_slope_tol(),
            exponent_tolerance: default_exponent_tol(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub density: DensitySpec,
    pub smoothness: SmoothnessConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub bandwidth: BandwidthConfig,
    pub grid: GridConfig,
    pub n_values: Vec<u64>,
    pub replications: usize,
    pub base_seed: u64,
    pub target: Target,
    pub statistic: Statistic,
    #[serde(default)]
    pub center: Center,
    #[serde(default)]
    pub theory: TheoryConfig,
    #[serde(default)]
    pub tail: TailSettings,
    #[serde(default)]
    pub acceptance: AcceptanceConfig,
}

/// Everything a run needs, built and checked once.
#[derive(Debug, Clone)]
pub struct Setup {
    pub density: TestDensity,
    pub kernel: KernelSpec,
    pub schedule: BandwidthSchedule,
    pub grid: EvaluationGrid,
    pub truth: Vec<f64>,
    pub statistic: Statistic,
    pub norm: NormOrder,
    pub tail_model: TailModel,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical JSON: fields in declaration order, defaults filled in.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        let d = self.dim();
        if self.kernel.dim != d {
            return cfg_err(format!("kernel.dim {} differs from density dim {d}", self.kernel.dim));
        }
        if self.n_values.is_empty() || self.n_values[0] == 0 {
            return cfg_err("n_values must be nonempty and positive".into());
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return cfg_err("n_values must be strictly increasing".into());
        }
        if self.replications < 2 {
            return cfg_err("replications must be at least 2".into());
        }
        if self.target == Target::Rate && self.n_values.len() < 4 {
            return cfg_err("a rate experiment needs at least 4 n values".into());
        }
        match (&self.grid, self.statistic) {
            (GridConfig::Point { x0 }, Statistic::Pointwise) => {
                if x0.len() != d {
                    return cfg_err(format!("grid.x0 has {} coordinates, expected {d}", x0.len()));
                }
            }
            (GridConfig::Box { lo, hi, points_per_axis, .. }, Statistic::Sup | Statistic::Lp { .. }) => {
                if lo.len() != d || hi.len() != d {
                    return cfg_err(format!("grid box bounds must have {d} coordinates"));
                }
                if *points_per_axis == 0 {
                    return cfg_err("grid.points_per_axis must be positive".into());
                }
            }
            (GridConfig::Point { .. }, _) => {
                return cfg_err("sup and L_p statistics need a box grid".into());
            }
            (GridConfig::Box { .. }, Statistic::Pointwise) => {
                return cfg_err("the pointwise statistic needs a point grid".into());
            }
        }
        if let Statistic::Lp { p } = self.statistic {
            if !(p >= 1.0) {
                return cfg_err(format!("statistic.p must be >= 1, got {p}"));
            }
        }
        let t = &self.tail;
        if t.u_points < 2 || !(t.window_hi > 0.0 && t.window_hi < 1.0) || !(t.min_exceedances > 0.0) {
            return cfg_err("tail settings out of range".into());
        }
        if !(t.regime_window.0 > 0.0 && t.regime_window.0 < t.regime_window.1) {
            return cfg_err("tail.regime_window must be an increasing pair of positive fractions".into());
        }
        if !(t.calibrate_max > 0.0) {
            return cfg_err("tail.calibrate_max must be positive".into());
        }
        let th = &self.theory;
        if !(th.c4 > 0.0 && th.c8 > 0.0 && th.c14 > 0.0 && th.c3 >= 0.0) {
            return cfg_err("theory constants must be positive (c3 nonnegative)".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<BandwidthSchedule> {
        let mut s = BandwidthSchedule::optimal(self.smoothness.beta, self.dim())
            .with_c2(self.bandwidth.c2)
            .with_log_gamma(self.bandwidth.gamma);
        if let Some(a) = self.bandwidth.exponent {
            s = s.with_exponent(a);
        }
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn tail_model(&self) -> Result<TailModel> {
        Ok(TailModel::new(self.smoothness.beta, self.dim())?
            .with_c_upper(self.theory.c4)
            .with_c_lower(self.theory.c14)
            .with_c_lp(self.theory.c8))
    }

    pub fn setup(&self) -> Result<Setup> {
        self.validate()?;
        let smoothness = SmoothnessClass::new(self.smoothness.beta, self.smoothness.holder_const)
            .map_err(|e| Error::Config(e.to_string()))?;
        let density = make_test_density(&self.density, smoothness)?;
        let kernel = self.kernel.build()?;
        let grid = match &self.grid {
            GridConfig::Point { x0 } => EvaluationGrid::dirac(x0)?,
            GridConfig::Box {
                lo,
                hi,
                points_per_axis,
                measure,
            } => EvaluationGrid::uniform_box(lo, hi, *points_per_axis, *measure)?,
        };
        let truth = grid.points().map(|x| density.pdf(x)).collect();
        let norm = match self.statistic {
            Statistic::Pointwise | Statistic::Sup => NormOrder::Sup,
            Statistic::Lp { p } => NormOrder::new(p)?,
        };
        Ok(Setup {
            density,
            kernel,
            schedule: self.schedule()?,
            grid,
            truth,
            statistic: self.statistic,
            norm,
            tail_model: self.tail_model()?,
        })
    }
}
