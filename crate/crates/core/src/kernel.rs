//! Smoothing kernels on `R^d`: evaluation, numerical validation of the
//! normalization, symmetry, integrability and vanishing-moment conditions,
//! and construction of higher-order product kernels.
//!
//! Every kernel here is a product `K(x) = k(x_1) ... k(x_d)` of a symmetric
//! one-dimensional profile, except for user supplied [`KernelSpec::custom`]
//! rules. Bounded supports are cubes `[-r, r]^d`, so `support_radius` is a
//! sup-norm radius.
//!
//! Higher-order profiles are built as `k(u) = (1 - u^2) q(u)` on `[-1, 1]`,
//! where `q` is the reproducing kernel at zero of the polynomials of degree
//! `<= order` in `L^2([-1, 1], (1 - u^2) du)`. The orthogonal polynomials for
//! that weight are the Legendre derivatives `P'_{j+1}`, with squared norms
//! `2 (j + 1)(j + 2) / (2j + 3)`, so
//!
//! ```text
//! q(u) = sum_{j <= order} P'_{j+1}(0) P'_{j+1}(u) (2j + 3) / (2 (j + 1)(j + 2)).
//! ```
//!
//! Then `∫ p(u) k(u) du = p(0)` for every polynomial of degree `<= order`,
//! which is exactly `∫ k = 1` plus vanishing moments `1..=order`. Orders 0
//! and 1 give the Epanechnikov kernel; order 3 gives `(15/32)(3 - 10u^2 + 7u^4)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Error, Result};
use crate::quadrature::TensorRule;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Highest order accepted by [`build_orthogonal_kernel`]; beyond this the
/// power-basis coefficients lose too much precision to be useful.
pub const MAX_ORTHOGONAL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Zero outside the cube `[-r, r]^d`.
    Bounded(f64),
    Unbounded,
}

/// One-dimensional profile of a product kernel.
#[derive(Debug, Clone, PartialEq)]
enum Profile {
    Gaussian,
    /// `(1 - u^2) * sum_i c_i u^{2i}` on `[-1, 1]`.
    Weighted { even_coeffs: Vec<f64> },
}

impl Profile {
    #[inline]
    fn value(&self, u: f64) -> f64 {
        match self {
            Profile::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            Profile::Weighted { even_coeffs } => {
                if u.abs() > 1.0 {
                    return 0.0;
                }
                let t = u * u;
                let q = even_coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
                (1.0 - t) * q
            }
        }
    }
}

type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Rule {
    Product(Profile),
    Custom(KernelFn),
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Product(p) => f.debug_tuple("Product").field(p).finish(),
            Rule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// An immutable kernel on `R^d` together with its declared properties.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    dim: usize,
    order: usize,
    support: Support,
    sup_bound: f64,
    truncation_radius: Option<f64>,
    rule: Rule,
}

impl KernelSpec {
    /// Product of standard normal densities; declared order 1.
    pub fn gaussian(dim: usize) -> Self {
        assert!(dim >= 1, "kernel dimension must be positive");
        Self {
            dim,
            order: 1,
            support: Support::Unbounded,
            sup_bound: INV_SQRT_2PI.powi(dim as i32),
            truncation_radius: Some(10.0),
            rule: Rule::Product(Profile::Gaussian),
        }
    }

    /// Product of `0.75 (1 - u^2)` on `[-1, 1]`; declared order 1.
    pub fn epanechnikov(dim: usize) -> Self {
        assert!(dim >= 1, "kernel dimension must be positive");
        Self {
            dim,
            order: 1,
            support: Support::Bounded(1.0),
            sup_bound: 0.75f64.powi(dim as i32),
            truncation_radius: None,
            rule: Rule::Product(Profile::Weighted {
                even_coeffs: vec![0.75],
            }),
        }
    }

    /// Wraps an arbitrary evaluation rule. Nothing about the declared
    /// properties is checked here; run [`validate_kernel`] for that.
    pub fn custom<F>(dim: usize, order: usize, support: Support, sup_bound: f64, rule: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            order,
            support,
            sup_bound,
            truncation_radius: None,
            rule: Rule::Custom(Arc::new(rule)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of leading moments (multi-degree `1..=order`) declared to vanish.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn truncation_radius(&self) -> Option<f64> {
        self.truncation_radius
    }

    pub fn with_truncation_radius(mut self, radius: f64) -> Self {
        self.truncation_radius = Some(radius);
        self
    }

    /// `K(x)`, checking the dimension of `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    /// `K(x)` without the dimension check. Callers guarantee `x.len() == dim`.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.rule {
            Rule::Product(profile) => {
                let mut acc = 1.0;
                for &xi in x {
                    acc *= profile.value(xi);
                    if acc == 0.0 {
                        break;
                    }
                }
                acc
            }
            Rule::Custom(f) => {
                if let Support::Bounded(r) = self.support {
                    if x.iter().any(|xi| xi.abs() > r) {
                        return 0.0;
                    }
                }
                f(x)
            }
        }
    }

    /// `K((x - center) / h)` without allocating.
    #[inline]
    pub fn value_scaled(&self, x: &[f64], center: &[f64], h: f64, scratch: &mut [f64]) -> f64 {
        if let Support::Bounded(r) = self.support {
            let reach = r * h;
            if x.iter().zip(center).any(|(a, b)| (a - b).abs() > reach) {
                return 0.0;
            }
        }
        match &self.rule {
            Rule::Product(profile) => {
                let mut acc = 1.0;
                for (a, b) in x.iter().zip(center) {
                    acc *= profile.value((a - b) / h);
                }
                acc
            }
            Rule::Custom(_) => {
                for ((s, a), b) in scratch.iter_mut().zip(x).zip(center) {
                    *s = (a - b) / h;
                }
                self.value(scratch)
            }
        }
    }
}

/// Higher-order product kernel with moments `1..=order` vanishing; see the
/// module documentation for the construction.
pub fn build_orthogonal_kernel(dim: usize, order: usize) -> Result<KernelSpec> {
    if dim == 0 {
        return Err(contract("kernel dimension must be positive"));
    }
    if order > MAX_ORTHOGONAL_ORDER {
        return Err(contract(format!(
            "orthogonal kernel order {order} exceeds the supported maximum {MAX_ORTHOGONAL_ORDER}"
        )));
    }
    let even_coeffs = reproducing_profile_coeffs(order);
    let profile = Profile::Weighted { even_coeffs };
    let peak = (0..=20_000)
        .map(|i| profile.value(-1.0 + i as f64 / 10_000.0).abs())
        .fold(0.0, f64::max);
    Ok(KernelSpec {
        dim,
        order,
        support: Support::Bounded(1.0),
        sup_bound: peak.powi(dim as i32),
        truncation_radius: None,
        rule: Rule::Product(profile),
    })
}

/// Coefficients of `q(u)` in powers of `u^2`.
fn reproducing_profile_coeffs(order: usize) -> Vec<f64> {
    // Power-basis coefficients of P_0 .. P_{order+1}.
    let top = order + 1;
    let mut legendre: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
    for n in 1..top {
        let nf = n as f64;
        let mut next = vec![0.0; n + 2];
        for (i, c) in legendre[n].iter().enumerate() {
            next[i + 1] += (2.0 * nf + 1.0) * c / (nf + 1.0);
        }
        for (i, c) in legendre[n - 1].iter().enumerate() {
            next[i] -= nf * c / (nf + 1.0);
        }
        legendre.push(next);
    }
    let derivative = |p: &[f64]| -> Vec<f64> {
        p.iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect()
    };

    let mut q = vec![0.0; top + 1];
    // Odd j contribute nothing because P'_{j+1} is odd and vanishes at 0.
    for j in (0..=order).step_by(2) {
        let dp = derivative(&legendre[j + 1]);
        let at_zero = dp[0];
        let jf = j as f64;
        let scale = at_zero * (2.0 * jf + 3.0) / (2.0 * (jf + 1.0) * (jf + 2.0));
        for (i, c) in dp.iter().enumerate() {
            q[i] += scale * c;
        }
    }
    q.iter().step_by(2).copied().collect()
}

/// Knobs for [`validate_kernel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub nodes_per_axis: usize,
    /// Integration radius for kernels with unbounded support.
    pub truncation_radius: Option<f64>,
    pub tolerance: f64,
    /// Also report moments up to this total degree (typically `[beta]`).
    pub requested_order: Option<usize>,
    pub symmetry_probes: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            nodes_per_axis: 64,
            truncation_radius: Some(10.0),
            tolerance: 1e-8,
            requested_order: None,
            symmetry_probes: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub multi_index: Vec<usize>,
    pub value: f64,
    /// Whether the declared order requires this moment to vanish.
    pub must_vanish: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationChecks {
    pub normalization: bool,
    pub symmetry: bool,
    pub square_integrable: bool,
    pub absolutely_integrable: bool,
    pub vanishing_moments: bool,
    pub sup_bound: bool,
    /// Moments up to the requested order vanish; `None` if nothing was requested.
    pub requested_order: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dim: usize,
    pub declared_order: usize,
    pub integration_radius: f64,
    pub integral: f64,
    pub integral_sq: f64,
    pub integral_abs: f64,
    pub max_abs_at_nodes: f64,
    pub symmetry_defect: f64,
    pub moments: Vec<MomentEntry>,
    pub tolerance: f64,
    pub checks: ValidationChecks,
}

impl ValidationReport {
    /// All conditions for the declared order hold.
    pub fn passed(&self) -> bool {
        let c = &self.checks;
        c.normalization
            && c.symmetry
            && c.square_integrable
            && c.absolutely_integrable
            && c.vanishing_moments
            && c.sup_bound
    }

    pub fn moment(&self, multi_index: &[usize]) -> Option<f64> {
        self.moments
            .iter()
            .find(|m| m.multi_index == multi_index)
            .map(|m| m.value)
    }

    /// Largest `|moment|` over multi-indices with odd total degree.
    pub fn max_odd_moment(&self) -> f64 {
        self.moments
            .iter()
            .filter(|m| m.multi_index.iter().sum::<usize>() % 2 == 1)
            .map(|m| m.value.abs())
            .fold(0.0, f64::max)
    }
}

/// All multi-indices of length `dim` with total degree in `1..=max_degree`,
/// ordered by degree and then lexicographically.
pub fn multi_indices(dim: usize, max_degree: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, dim: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=remaining).rev() {
            prefix.push(first);
            fill(prefix, dim, remaining - first, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 1..=max_degree {
        fill(&mut Vec::with_capacity(dim), dim, degree, &mut out);
    }
    out
}

/// Numerically checks normalization, symmetry, integrability and the
/// vanishing-moment conditions of `kernel` with a tensor Gauss–Legendre rule.
pub fn validate_kernel(kernel: &KernelSpec, settings: &QuadratureSettings) -> Result<ValidationReport> {
    if settings.nodes_per_axis < 2 {
        return Err(contract("quadrature needs at least 2 nodes per axis"));
    }
    let radius = match kernel.support {
        Support::Bounded(r) => r,
        Support::Unbounded => settings
            .truncation_radius
            .or(kernel.truncation_radius)
            .ok_or_else(|| contract("unbounded kernel needs a truncation radius"))?,
    };
    if !(radius.is_finite() && radius > 0.0) {
        return Err(contract("integration radius must be positive and finite"));
    }

    let dim = kernel.dim;
    let max_degree = kernel.order.max(settings.requested_order.unwrap_or(0));
    let indices = multi_indices(dim, max_degree);
    let rule = TensorRule::cube(dim, settings.nodes_per_axis, radius);

    let mut integral = 0.0;
    let mut integral_sq = 0.0;
    let mut integral_abs = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut moments = vec![0.0; indices.len()];
    let mut failure = None;
    rule.for_each(|x, w| {
        if failure.is_some() {
            return;
        }
        let v = kernel.value(x);
        if !v.is_finite() {
            failure = Some(Error::NonFinite {
                location: x.to_vec(),
                value: v,
            });
            return;
        }
        integral += w * v;
        integral_sq += w * v * v;
        integral_abs += w * v.abs();
        max_abs = max_abs.max(v.abs());
        for (acc, m) in moments.iter_mut().zip(&indices) {
            let mono: f64 = x.iter().zip(m).map(|(xi, &p)| xi.powi(p as i32)).product();
            *acc += w * mono * v;
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }

    let symmetry_defect = symmetry_defect(kernel, radius, settings.symmetry_probes)?;

    let tol = settings.tolerance;
    let moments: Vec<MomentEntry> = indices
        .into_iter()
        .zip(moments)
        .map(|(multi_index, value)| {
            let must_vanish = multi_index.iter().sum::<usize>() <= kernel.order;
            MomentEntry {
                multi_index,
                value,
                must_vanish,
            }
        })
        .collect();
    let vanishing_moments = moments
        .iter()
        .filter(|m| m.must_vanish)
        .all(|m| m.value.abs() <= tol);
    let requested_order = settings.requested_order.map(|r| {
        moments
            .iter()
            .filter(|m| m.multi_index.iter().sum::<usize>() <= r)
            .all(|m| m.value.abs() <= tol)
    });

    let checks = ValidationChecks {
        normalization: (integral - 1.0).abs() <= tol,
        symmetry: symmetry_defect <= tol,
        square_integrable: integral_sq.is_finite(),
        absolutely_integrable: integral_abs.is_finite(),
        vanishing_moments,
        sup_bound: kernel.sup_bound.is_finite() && max_abs <= kernel.sup_bound * (1.0 + 1e-12),
        requested_order,
    };

    Ok(ValidationReport {
        dim,
        declared_order: kernel.order,
        integration_radius: radius,
        integral,
        integral_sq,
        integral_abs,
        max_abs_at_nodes: max_abs,
        symmetry_defect,
        moments,
        tolerance: tol,
        checks,
    })
}

/// `max |K(x) - K(-x)|` over deterministic probe points in `[-radius, radius]^d`.
fn symmetry_defect(kernel: &KernelSpec, radius: f64, probes: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05EE_D0F5_CA1E);
    let mut x = vec![0.0; kernel.dim];
    let mut neg = vec![0.0; kernel.dim];
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        for (xi, ni) in x.iter_mut().zip(neg.iter_mut()) {
            *xi = rng.random_range(-radius..radius);
            *ni = -*xi;
        }
        let a = kernel.value(&x);
        let b = kernel.value(&neg);
        if !a.is_finite() || !b.is_finite() {
            let (location, value) = if a.is_finite() { (neg, b) } else { (x, a) };
            return Err(Error::NonFinite { location, value });
        }
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

/// Kernel family as named in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Epanechnikov,
    Orthogonal,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "epanechnikov" => Ok(Self::Epanechnikov),
            "orthogonal" => Ok(Self::Orthogonal),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// `{family, dim, order, truncation_radius}` as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
}

impl KernelConfig {
    pub fn build(&self) -> Result<KernelSpec> {
        if self.dim == 0 {
            return Err(Error::Config("kernel.dim must be positive".into()));
        }
        let kernel = match self.family {
            KernelFamily::Gaussian => KernelSpec::gaussian(self.dim),
            KernelFamily::Epanechnikov => KernelSpec::epanechnikov(self.dim),
            KernelFamily::Orthogonal => build_orthogonal_kernel(self.dim, self.order.unwrap_or(1))?,
        };
        if let (Some(order), KernelFamily::Gaussian | KernelFamily::Epanechnikov) = (self.order, self.family) {
            if order > 1 {
                return Err(Error::Config(format!(
                    "{:?} kernels only have order 1; use the orthogonal family for order {order}",
                    self.family
                )));
            }
        }
        Ok(match self.truncation_radius {
            Some(r) => kernel.with_truncation_radius(r),
            None => kernel,
        })
    }
}
