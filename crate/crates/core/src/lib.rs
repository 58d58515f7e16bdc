//! Recursive (Wolverton–Wagner) kernel density estimation.
//!
//! The estimator gives the `k`-th observation its own bandwidth `h_k`, so the
//! estimate on a fixed grid can be updated in `O(grid)` work per sample
//! without storing data. Around it the crate provides kernels (including
//! higher-order ones), the optimal bandwidth schedule, exponential tail
//! bounds and confidence radii for the normalized error, error metrics, and
//! a seeded Monte Carlo harness for checking rates and tail exponents.
//!
//! ```
//! use wwkde::{BandwidthSchedule, EstimatorState, EvaluationGrid, KernelSpec};
//!
//! let grid = EvaluationGrid::dirac(&[0.0]).unwrap();
//! let mut st = EstimatorState::new(grid, KernelSpec::gaussian(1), BandwidthSchedule::optimal(2.0, 1)).unwrap();
//! st.update(&[0.0]).unwrap();
//! assert!((st.values()[0] - 0.398_942_3).abs() < 1e-7);
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod metrics;
pub mod quadrature;
pub mod simulate;
pub mod theory;

pub use bandwidth::{bandwidth_at, bias_bound, normalizer, target_functional, BandwidthSchedule, SmoothnessClass};
pub use error::{Error, Result};
pub use estimator::{
    clip_and_renormalize, max_relative_deviation, pr_batch, ww_batch, ww_init, EstimatorState, EvaluationGrid, Measure,
};
pub use kernel::{
    build_orthogonal_kernel, validate_kernel, KernelConfig, KernelFamily, KernelSpec, QuadratureSettings, Support,
    ValidationReport,
};
pub use metrics::{bias_variance_decompose, lp_norm, BiasVariance, ErrorReport, NormOrder, ReplicationAccumulator};
pub use theory::{fenchel_conjugate, ConfidenceRadius, SearchSettings, TailBound, TailModel};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/estimator.md")]
    mod estimator {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/bandwidth.md")]
    mod bandwidth {}
    #[doc = include_str!("../../../book/src/confidence.md")]
    mod confidence {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
