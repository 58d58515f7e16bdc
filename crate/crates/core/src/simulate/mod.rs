//! Seeded Monte Carlo experiments against densities with known smoothness.
//!
//! Every replication draws from its own ChaCha8 stream seeded with
//! `base_seed XOR replication`, and results are merged in replication order,
//! so reports are bit-identical for any number of worker threads.

mod compare;
mod config;
mod density;
mod fit;
mod rate;
mod rng;
mod runner;
mod tail;

pub use compare::{compare_variance, trajectory_l2_check, TrajectoryCheck, VarianceComparison};
pub use config::{
    AcceptanceConfig, BandwidthConfig, Center, ExperimentConfig, GridConfig, Setup, SmoothnessConfig, Statistic,
    TailSettings, Target, TheoryConfig,
};
pub use density::{make_test_density, DensitySpec, MixtureComponent, TestDensity};
pub use fit::{linear_fit, wilson_interval, LinearFit, Z95};
pub use rate::{run_rate_experiment, theoretical_slope, RateReport, RateRow};
pub use rng::{replication_rng, replication_seed};
pub use runner::RunOptions;
pub use tail::{
    calibrate_constant, fit_tail_exponent, run_calibration, run_tail_experiment, synthetic_deviations, Calibration,
    CalibrationReport, ExponentFit, TailCurve, TailReport, MIN_RELIABLE_POINTS, RECOMMENDED_REPLICATIONS,
};
