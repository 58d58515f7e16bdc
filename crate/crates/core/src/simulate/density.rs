//! Densities with exact evaluation and exact samplers, used as ground truth.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bandwidth::SmoothnessClass;
use crate::error::{contract, Error, Result};
use crate::quadrature::GaussLegendre;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Half-width, in standard deviations, of the box reported as effective
/// support of Gaussian families; leaves < 1e-10 mass outside per axis.
const GAUSS_SUPPORT_SDS: f64 = 6.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    /// Location of every coordinate.
    pub mean: f64,
    pub sd: f64,
}

/// Test density families. Multivariate versions are products over coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensitySpec {
    Gaussian {
        dim: usize,
        #[serde(default)]
        mean: f64,
        #[serde(default = "unit")]
        sd: f64,
    },
    GaussianMixture {
        dim: usize,
        components: Vec<MixtureComponent>,
    },
    /// `exp(-1/(1 - x^2))` on `(-1, 1)`, normalized; infinitely smooth.
    SmoothBump { dim: usize },
    /// `1 - |x|` on `[-1, 1]`; Lipschitz, so smoothness 1.
    Triangular { dim: usize },
}

fn unit() -> f64 {
    1.0
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Gaussian { dim, .. }
            | DensitySpec::GaussianMixture { dim, .. }
            | DensitySpec::SmoothBump { dim }
            | DensitySpec::Triangular { dim } => *dim,
        }
    }
}

#[derive(Debug, Clone)]
enum Family {
    Gaussian { mean: f64, sd: f64 },
    Mixture { components: Vec<MixtureComponent>, cumulative: Vec<f64> },
    Bump { norm: f64 },
    Triangular,
}

/// A known density on `R^d` in a declared smoothness class.
#[derive(Debug, Clone)]
pub struct TestDensity {
    dim: usize,
    spec: DensitySpec,
    family: Family,
    smoothness: SmoothnessClass,
    support: Vec<(f64, f64)>,
}

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

fn bump_integral(a: f64, b: f64) -> f64 {
    let rule = GaussLegendre::new(32);
    rule.integrate_composite(a, b, 64, bump)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Builds a test density. `smoothness` is the class the experiment assumes;
/// it must be compatible with the family (the triangular density only
/// belongs to classes with `beta <= 1`).
pub fn make_test_density(spec: &DensitySpec, smoothness: SmoothnessClass) -> Result<TestDensity> {
    let dim = spec.dim();
    if dim == 0 {
        return Err(Error::Config("density dimension must be positive".into()));
    }
    let (family, axis) = match spec {
        DensitySpec::Gaussian { mean, sd, .. } => {
            if !(*sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                return Err(Error::Config("Gaussian density needs finite mean and sd > 0".into()));
            }
            let r = GAUSS_SUPPORT_SDS * sd;
            (Family::Gaussian { mean: *mean, sd: *sd }, (mean - r, mean + r))
        }
        DensitySpec::GaussianMixture { components, .. } => {
            if components.is_empty() {
                return Err(Error::Config("mixture needs at least one component".into()));
            }
            if components.iter().any(|c| !(c.weight >= 0.0 && c.sd > 0.0 && c.mean.is_finite())) {
                return Err(Error::Config("mixture components need weight >= 0 and sd > 0".into()));
            }
            let total: f64 = components.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
            }
            let lo = components
                .iter()
                .map(|c| c.mean - GAUSS_SUPPORT_SDS * c.sd)
                .fold(f64::INFINITY, f64::min);
            let hi = components
                .iter()
                .map(|c| c.mean + GAUSS_SUPPORT_SDS * c.sd)
                .fold(f64::NEG_INFINITY, f64::max);
            let cumulative = components
                .iter()
                .scan(0.0, |acc, c| {
                    *acc += c.weight;
                    Some(*acc)
                })
                .collect();
            (
                Family::Mixture {
                    components: components.clone(),
                    cumulative,
                },
                (lo, hi),
            )
        }
        DensitySpec::SmoothBump { .. } => (
            Family::Bump {
                norm: bump_integral(-1.0, 1.0),
            },
            (-1.0, 1.0),
        ),
        DensitySpec::Triangular { .. } => {
            if smoothness.beta > 1.0 {
                return Err(contract(format!(
                    "the triangular density is only in smoothness classes with beta <= 1, not {}",
                    smoothness.beta
                )));
            }
            (Family::Triangular, (-1.0, 1.0))
        }
    };
    Ok(TestDensity {
        dim,
        spec: spec.clone(),
        family,
        smoothness,
        support: vec![axis; dim],
    })
}

impl TestDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn smoothness(&self) -> SmoothnessClass {
        self.smoothness
    }

    /// Box holding all but a negligible (< 1e-9) part of the mass.
    pub fn effective_support(&self) -> &[(f64, f64)] {
        &self.support
    }

    fn axis_pdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                INV_SQRT_2PI * (-0.5 * z * z).exp() / sd
            }
            Family::Mixture { components, .. } => components
                .iter()
                .map(|c| {
                    let z = (x - c.mean) / c.sd;
                    c.weight * INV_SQRT_2PI * (-0.5 * z * z).exp() / c.sd
                })
                .sum(),
            Family::Bump { norm } => bump(x) / norm,
            Family::Triangular => (1.0 - x.abs()).max(0.0),
        }
    }

    fn axis_cdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { mean, sd } => normal_cdf((x - mean) / sd),
            Family::Mixture { components, .. } => components
                .iter()
                .map(|c| c.weight * normal_cdf((x - c.mean) / c.sd))
                .sum(),
            Family::Bump { norm } => {
                if x <= -1.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    bump_integral(-1.0, x) / norm
                }
            }
            Family::Triangular => {
                if x <= -1.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else if x <= 0.0 {
                    0.5 * (1.0 + x) * (1.0 + x)
                } else {
                    1.0 - 0.5 * (1.0 - x) * (1.0 - x)
                }
            }
        }
    }

    /// Exact density at `x` (caller guarantees `x.len() == dim`).
    pub fn pdf(&self, x: &[f64]) -> f64 {
        match &self.family {
            // Mixture components share the coordinates, so the product is
            // taken inside each component.
            Family::Mixture { components, .. } if self.dim > 1 => components
                .iter()
                .map(|c| {
                    c.weight
                        * x.iter()
                            .map(|xi| {
                                let z = (xi - c.mean) / c.sd;
                                INV_SQRT_2PI * (-0.5 * z * z).exp() / c.sd
                            })
                            .product::<f64>()
                })
                .sum(),
            _ => x.iter().map(|&xi| self.axis_pdf(xi)).product(),
        }
    }

    /// Exact CDF of a one-dimensional density.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if self.dim != 1 {
            return Err(contract("CDF is only provided for one-dimensional densities"));
        }
        Ok(self.axis_cdf(x))
    }

    fn sample_axis<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            Family::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Family::Mixture { .. } => unreachable!("mixtures are sampled jointly"),
            Family::Bump { .. } => loop {
                let x: f64 = rng.random_range(-1.0..1.0);
                let accept: f64 = rng.random();
                // bump(0) = e^{-1} is the maximum
                if accept * (-1.0f64).exp() < bump(x) {
                    break x;
                }
            },
            Family::Triangular => {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                a + b - 1.0
            }
        }
    }

    /// Draws one point into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.family {
            Family::Mixture { components, cumulative } => {
                let pick: f64 = rng.random();
                let idx = cumulative
                    .iter()
                    .position(|c| pick < *c)
                    .unwrap_or(components.len() - 1);
                let c = &components[idx];
                for slot in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *slot = c.mean + c.sd * z;
                }
            }
            _ => {
                for slot in out.iter_mut() {
                    *slot = self.sample_axis(rng);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let mut p = vec![0.0; self.dim];
                self.sample_into(rng, &mut p);
                p
            })
            .collect()
    }
}
