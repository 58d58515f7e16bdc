//! Gauss–Legendre rules on intervals and their tensor products on boxes.

use std::f64::consts::PI;

/// A one-dimensional Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on `P_n`, started from
    /// the Chebyshev-like guesses `cos(pi (i - 1/4) / (n + 1/2))`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }

    /// Composite rule: `panels` equal sub-intervals of `[a, b]`, each with this rule.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let step = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + step * p as f64;
                self.integrate(lo, lo + step, &mut f)
            })
            .sum()
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product Gauss–Legendre rule on the cube `[-r, r]^d`.
#[derive(Debug, Clone)]
pub struct TensorRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorRule {
    pub fn cube(dim: usize, nodes_per_axis: usize, radius: f64) -> Self {
        let rule = GaussLegendre::new(nodes_per_axis);
        let nodes = rule.nodes.iter().map(|t| t * radius).collect();
        let weights = rule.weights.iter().map(|w| w * radius).collect();
        Self { dim, nodes, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of tensor nodes, `nodes_per_axis^d`.
    pub fn size(&self) -> usize {
        self.nodes.len().pow(self.dim as u32)
    }

    /// Calls `visit(point, weight)` for every tensor node in lexicographic order.
    pub fn for_each<F: FnMut(&[f64], f64)>(&self, mut visit: F) {
        let m = self.nodes.len();
        let mut idx = vec![0usize; self.dim];
        let mut point = vec![0.0; self.dim];
        for _ in 0..self.size() {
            let mut w = 1.0;
            for (axis, &i) in idx.iter().enumerate() {
                point[axis] = self.nodes[i];
                w *= self.weights[i];
            }
            visit(&point, w);
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < m {
                    break;
                }
                *slot = 0;
            }
        }
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = 0.0;
        self.for_each(|x, w| acc += w * f(x));
        acc
    }
}
