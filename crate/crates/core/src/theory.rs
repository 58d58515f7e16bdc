//! Closed-form tail bounds for the normalized deviation `B_n (f_n - f)`.
//!
//! With `q = (2 beta + d) / beta` and its conjugate `q* = q / (q - 1) =
//! (2 beta + d) / (beta + d)`, the log-moment generating function of the
//! normalized deviation is dominated by
//!
//! ```text
//! phi_m(lambda) = lambda^2            for |lambda| <= m,
//!                 |lambda|^q          for |lambda| >  m,      m = n^{beta/(2 beta + d)}.
//! ```
//!
//! The Chernoff argument turns this into `P(|Theta_n| > u) <= exp(-phi_m^*(u))`,
//! where `phi_m^*` is the Young–Fenchel conjugate. That yields a Gaussian
//! regime `exp(-u^2)` for `u < m` and a heavier `exp(-u^{q*})` regime beyond,
//! and uniformly in `n` the bound `2 exp(-C4 u^{q*})`.
//!
//! The constants (`C3`, `C4`, `C8`, `C14`) are existential; they are carried
//! on [`TailModel`] with default 1 and can be calibrated from simulations.

use serde::{Deserialize, Serialize};

use crate::bandwidth::normalizer;
use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub beta: f64,
    pub dim: usize,
    /// `C4` in the upper tail bound.
    #[serde(default = "one")]
    pub c_upper: f64,
    /// `C14` in the lower bound and in the summed-series bound.
    #[serde(default = "one")]
    pub c_lower: f64,
    /// `C8` in the L_p tail bound.
    #[serde(default = "one")]
    pub c_lp: f64,
}

fn one() -> f64 {
    1.0
}

/// A probability bound with the caveats under which it was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub probability: f64,
    /// `u` lies below the range in which the bound is stated (`u < 1`).
    pub extrapolated: bool,
    /// The bound is trivially 1 (e.g. `u < C3` for the L_p bound).
    pub vacuous: bool,
}

impl TailModel {
    pub fn new(beta: f64, dim: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(contract("tail model needs beta > 0"));
        }
        if dim == 0 {
            return Err(contract("tail model needs d >= 1"));
        }
        Ok(Self {
            beta,
            dim,
            c_upper: 1.0,
            c_lower: 1.0,
            c_lp: 1.0,
        })
    }

    pub fn with_c_upper(mut self, c: f64) -> Self {
        self.c_upper = c;
        self
    }

    pub fn with_c_lower(mut self, c: f64) -> Self {
        self.c_lower = c;
        self
    }

    pub fn with_c_lp(mut self, c: f64) -> Self {
        self.c_lp = c;
        self
    }

    fn d(&self) -> f64 {
        self.dim as f64
    }

    /// `q = (2 beta + d) / beta`, the growth exponent of `phi_m` beyond `m`.
    pub fn exponent_q(&self) -> f64 {
        (2.0 * self.beta + self.d()) / self.beta
    }

    /// `q* = (2 beta + d) / (beta + d)`, the tail exponent.
    pub fn exponent_qstar(&self) -> f64 {
        (2.0 * self.beta + self.d()) / (self.beta + self.d())
    }

    /// Regime boundary `m(n) = n^{beta / (2 beta + d)}`, equal to `B_n`.
    pub fn regime_m(&self, n: u64) -> Result<f64> {
        normalizer(n, self.beta, self.dim)
    }

    /// `phi_m(lambda)` with `m = m(n)`.
    pub fn phi(&self, n: u64, lambda: f64) -> Result<f64> {
        let m = self.regime_m(n)?;
        Ok(phi_with_boundary(m, self.exponent_q(), lambda))
    }

    /// `phi_m^*(u)` in closed form (the supremum of each concave branch).
    pub fn phi_conjugate(&self, n: u64, u: f64) -> Result<f64> {
        let m = self.regime_m(n)?;
        Ok(phi_conjugate_closed_form(m, self.exponent_q(), u))
    }

    /// `2 exp(-C4 u^{q*})`, capped at 1.
    pub fn tail_upper(&self, u: f64) -> TailBound {
        let p = 2.0 * (-self.c_upper * u.max(0.0).powf(self.exponent_qstar())).exp();
        TailBound {
            probability: p.min(1.0),
            extrapolated: u < 1.0,
            vacuous: p >= 1.0,
        }
    }

    /// `-ln` of the uncapped two-regime bound:
    /// `C4 u^2` below `m`, and `C4 (u^{q*} + m^2 - m^{q*})` from `m` on, so the
    /// two branches meet at `u = m`.
    pub fn two_regime_exponent(&self, n: u64, u: f64) -> Result<f64> {
        let m = self.regime_m(n)?;
        let u = u.abs();
        let qs = self.exponent_qstar();
        Ok(if u < m {
            self.c_upper * u * u
        } else {
            self.c_upper * (u.powf(qs) + m * m - m.powf(qs))
        })
    }

    /// Gaussian regime for `u < m(n)`, heavier regime beyond, capped at 1.
    pub fn tail_two_regime(&self, n: u64, u: f64) -> Result<TailBound> {
        if u < 0.0 {
            return Err(contract("two-regime bound needs u >= 0"));
        }
        let e = self.two_regime_exponent(n, u)?;
        let p = (-e).exp();
        Ok(TailBound {
            probability: p.min(1.0),
            extrapolated: u < 1.0,
            vacuous: p >= 1.0,
        })
    }

    /// Inverts the upper bound at level `alpha`; see [`ConfidenceRadius`].
    pub fn confidence_radius(&self, n: u64, alpha: f64, c3: f64) -> Result<ConfidenceRadius> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(contract(format!("confidence level alpha must lie in (0, 1), got {alpha}")));
        }
        if !(c3 >= 0.0 && c3.is_finite()) {
            return Err(contract("bias allowance c3 must be nonnegative"));
        }
        if !(self.c_upper > 0.0) {
            return Err(contract("c_upper must be positive"));
        }
        let b_n = normalizer(n, self.beta, self.dim)?;
        let u_star = ((2.0 / alpha).ln() / self.c_upper).powf(1.0 / self.exponent_qstar());
        Ok(ConfidenceRadius {
            n,
            alpha,
            normalizer: b_n,
            u_star,
            radius: u_star / b_n,
            half_width: (u_star + c3) / b_n,
            extrapolated: u_star < 1.0,
        })
    }

    /// `exp(-C8 (u - C3)^{q*})` for `u >= C3`; vacuous (1) below.
    pub fn lp_tail_upper(&self, u: f64, c3: f64) -> TailBound {
        if u < c3 {
            return TailBound {
                probability: 1.0,
                extrapolated: u < 1.0,
                vacuous: true,
            };
        }
        let p = (-self.c_lp * (u - c3).powf(self.exponent_qstar())).exp();
        TailBound {
            probability: p.min(1.0),
            extrapolated: u < 1.0,
            vacuous: p >= 1.0,
        }
    }

    /// `2 exp(-C14 u^{q*})`. Only meaningful as a lower bound when
    /// `C14 >= C4`; see [`TailModel::lower_dominates_upper`].
    pub fn tail_lower(&self, u: f64) -> TailBound {
        let p = 2.0 * (-self.c_lower * u.max(0.0).powf(self.exponent_qstar())).exp();
        TailBound {
            probability: p.min(1.0),
            extrapolated: u < 1.0,
            vacuous: p >= 1.0,
        }
    }

    /// False when `C14 < C4`, i.e. the lower bound would exceed the upper.
    pub fn lower_dominates_upper(&self) -> bool {
        self.c_lower >= self.c_upper
    }

    /// Terms `Delta_k(v) = exp(-k^{beta/(beta+d)} v^{q*})` for `k <= n_max`,
    /// their sum, and the bound `C14 v^{-q}` on the full series.
    pub fn as_convergence_terms(&self, v: f64, n_max: u64) -> Result<ConvergenceTerms> {
        if !(v >= 1.0) {
            return Err(contract("series bound needs v >= 1"));
        }
        if n_max == 0 {
            return Err(contract("series bound needs n_max >= 1"));
        }
        let a = self.beta / (self.beta + self.d());
        let vq = v.powf(self.exponent_qstar());
        let terms: Vec<f64> = (1..=n_max).map(|k| (-(k as f64).powf(a) * vq).exp()).collect();
        let partial_sum = terms.iter().rev().sum();
        Ok(ConvergenceTerms {
            v,
            terms,
            partial_sum,
            series_bound: self.c_lower * v.powf(-self.exponent_q()),
        })
    }
}

/// `phi` for an explicit boundary `m` and outer exponent `q`.
pub fn phi_with_boundary(m: f64, q: f64, lambda: f64) -> f64 {
    let a = lambda.abs();
    if a <= m {
        a * a
    } else {
        a.powf(q)
    }
}

/// Closed-form `sup_lambda (lambda u - phi_m(lambda))`.
///
/// On `[0, m]` the supremum of `lambda u - lambda^2` is `u^2/4` if `u/2 <= m`
/// and `m u - m^2` otherwise. On `(m, inf)` the stationary point of
/// `lambda u - lambda^q` is `(u/q)^{1/(q-1)}`; if that lies beyond `m` the
/// value there is `(1 - 1/q) u lambda*`, otherwise the supremum is the
/// (unattained) right limit `m u - m^q`.
pub fn phi_conjugate_closed_form(m: f64, q: f64, u: f64) -> f64 {
    let u = u.abs();
    let inner = if u / 2.0 <= m { u * u / 4.0 } else { m * u - m * m };
    let stationary = (u / q).powf(1.0 / (q - 1.0));
    let outer = if stationary > m {
        (1.0 - 1.0 / q) * u * stationary
    } else {
        m * u - m.powf(q)
    };
    inner.max(outer)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRadius {
    pub n: u64,
    pub alpha: f64,
    pub normalizer: f64,
    /// Solves `2 exp(-C4 u^{q*}) = alpha`.
    pub u_star: f64,
    /// `u* / B_n`.
    pub radius: f64,
    /// `(u* + C3) / B_n`; covers the bias as well as the fluctuation.
    pub half_width: f64,
    /// `u* < 1`, below the stated range of the bound.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTerms {
    pub v: f64,
    pub terms: Vec<f64>,
    pub partial_sum: f64,
    /// `C14 v^{-(2 beta + d)/beta}`.
    pub series_bound: f64,
}

/// Search parameters for [`fenchel_conjugate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    /// Initial right end of the search interval `[0, lambda_max]`.
    pub lambda_max: f64,
    pub grid_points: usize,
    /// Relative accuracy of the golden-section refinement in `lambda`.
    pub rel_tol: f64,
    /// How many times `lambda_max` may be quadrupled before giving up.
    pub max_widenings: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            lambda_max: 1.0,
            grid_points: 4096,
            rel_tol: 1e-12,
            max_widenings: 40,
        }
    }
}

/// Numerical Young–Fenchel transform `sup_lambda (lambda u - f(lambda))` for
/// an even `f`, searched over `lambda in [0, lambda_max]` after replacing `u`
/// by `|u|`.
///
/// A uniform grid locates the best cell, then golden-section search refines
/// inside the two neighbouring cells. While the objective is still rising at
/// the right end of the grid the interval is widened and the search
/// repeated, so `f` only needs to be convex beyond the final `lambda_max`
/// (it may jump or bend below it, as `phi_m` does at `m`).
pub fn fenchel_conjugate<F: Fn(f64) -> f64>(f: F, u: f64, search: &SearchSettings) -> Result<f64> {
    if !u.is_finite() {
        return Err(contract("conjugate argument must be finite"));
    }
    if search.grid_points < 3 || !(search.lambda_max > 0.0) {
        return Err(contract("conjugate search needs >= 3 grid points and lambda_max > 0"));
    }
    let u = u.abs();
    let g = |lambda: f64| lambda * u - f(lambda);
    let mut lambda_max = search.lambda_max;
    for _ in 0..=search.max_widenings {
        let step = lambda_max / (search.grid_points - 1) as f64;
        let values: Vec<f64> = (0..search.grid_points).map(|i| g(i as f64 * step)).collect();
        let (best_i, best_v) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let last = search.grid_points - 1;
        if best_i == last || values[last] > values[last - 1] {
            lambda_max *= 4.0;
            continue;
        }
        let lo = best_i.saturating_sub(1) as f64 * step;
        let hi = (best_i + 1) as f64 * step;
        let refined = golden_max(&g, lo, hi, search.rel_tol);
        return Ok(best_v.max(refined));
    }
    Err(Error::SearchBoundary { lambda_max })
}

/// Golden-section maximization of `g` on `[a, b]`; returns the best value seen.
fn golden_max<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    let mut best = gc.max(gd).max(g(a)).max(g(b));
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
            best = best.max(gc);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
            best = best.max(gd);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(beta: f64, dim: usize) -> TailModel {
        TailModel::new(beta, dim).unwrap()
    }

    #[test]
    fn exponents() {
        let tm = model(1.0, 1);
        assert_eq!(tm.exponent_q(), 3.0);
        assert_eq!(tm.exponent_qstar(), 1.5);
        for (b, d) in [(0.3, 1), (1.0, 3), (5.0, 2), (20.0, 1)] {
            let tm = model(b, d);
            let (q, qs) = (tm.exponent_q(), tm.exponent_qstar());
            assert!(qs > 1.0 && qs < 2.0);
            assert!((qs - q / (q - 1.0)).abs() < 1e-12);
        }
        assert_eq!(model(1.0, 1).regime_m(8).unwrap(), normalizer(8, 1.0, 1).unwrap());
    }

    #[test]
    fn phi_branches() {
        let tm = model(1.0, 1);
        // n = 8 gives m = 2
        assert!((tm.regime_m(8).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(tm.phi(8, 1.0).unwrap(), 1.0);
        assert!((tm.phi(8, 3.0).unwrap() - 27.0).abs() < 1e-12);
        assert!((tm.phi(8, -3.0).unwrap() - 27.0).abs() < 1e-12);
        assert_eq!(tm.phi(8, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn conjugate_of_square() {
        let s = SearchSettings::default();
        assert!((fenchel_conjugate(|l| l * l, 2.0, &s).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fenchel_conjugate(|l| l * l, 0.0, &s).unwrap(), 0.0);
        assert!((fenchel_conjugate(|l| l * l, -6.0, &s).unwrap() - 9.0).abs() < 1e-10);
    }

    #[test]
    fn conjugate_gives_up_on_unbounded_supremum() {
        let s = SearchSettings {
            max_widenings: 3,
            ..Default::default()
        };
        // sup (lambda u - lambda) is infinite for u > 1
        let err = fenchel_conjugate(|l: f64| l.abs(), 2.0, &s).unwrap_err();
        assert!(matches!(err, Error::SearchBoundary { .. }));
    }

    #[test]
    fn tail_upper_examples() {
        let tm = model(1.0, 1);
        let b = tm.tail_upper(1.0);
        assert!((b.probability - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(!b.extrapolated);
        let u = 2f64.ln().powf(2.0 / 3.0);
        let b = tm.tail_upper(u);
        assert!((b.probability - 1.0).abs() < 1e-12);
        assert!(b.extrapolated);
        let tm = model(2.0, 1);
        let want = 2.0 * (-32.0f64).exp();
        assert!((tm.tail_upper(8.0).probability / want - 1.0).abs() < 1e-12);
        assert_eq!(model(1.0, 1).tail_upper(0.0).probability, 1.0);
    }

    #[test]
    fn two_regime_examples() {
        let tm = model(1.0, 1);
        let b = tm.tail_two_regime(8, 1.0).unwrap();
        assert!((b.probability - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(tm.tail_two_regime(8, 0.0).unwrap().probability, 1.0);
        // continuity at u = m = 2
        let below = tm.two_regime_exponent(8, 2.0 - 1e-12).unwrap();
        let at = tm.two_regime_exponent(8, 2.0).unwrap();
        assert!((below - at).abs() < 1e-9);
        assert!((at - 4.0).abs() < 1e-12);
        // m^2 = m^{q*} m^{2 - q*}
        let m: f64 = 2.0;
        assert!((m * m - m.powf(1.5) * m.powf(0.5)).abs() < 1e-14);
        assert!(tm.tail_two_regime(8, -1.0).is_err());
    }

    #[test]
    fn two_regime_is_below_uniform_bound() {
        let tm = model(1.5, 2);
        for n in [1u64, 10, 1000, 100_000] {
            for i in 0..200 {
                let u = 0.05 * i as f64;
                let two = tm.tail_two_regime(n, u).unwrap().probability;
                assert!(two <= tm.tail_upper(u).probability + 1e-15);
            }
        }
    }

    #[test]
    fn confidence_radius_examples() {
        let tm = model(1.0, 1);
        let alpha = 2.0 * (-8.0f64).exp();
        let ci = tm.confidence_radius(8, alpha, 0.0).unwrap();
        assert!((ci.u_star - 4.0).abs() < 1e-12);
        assert!((ci.radius - 2.0).abs() < 1e-12);
        assert_eq!(ci.half_width, ci.radius);
        let alpha = 2.0 * (-1.0f64).exp();
        for n in [1, 17, 5000] {
            let ci = tm.confidence_radius(n, alpha, 0.5).unwrap();
            assert!((ci.u_star - 1.0).abs() < 1e-12);
            assert!((ci.radius - 1.0 / normalizer(n, 1.0, 1).unwrap()).abs() < 1e-12);
            assert!(ci.half_width > ci.radius);
        }
        let wide = tm.confidence_radius(100, 0.025, 0.0).unwrap();
        let narrow = tm.confidence_radius(100, 0.05, 0.0).unwrap();
        assert!(wide.radius > narrow.radius);
        assert!(tm.confidence_radius(100, 1.0, 0.0).is_err());
        assert!(tm.confidence_radius(100, 0.0, 0.0).is_err());
        // the radius inverts the bound
        let ci = tm.confidence_radius(64, 0.01, 0.0).unwrap();
        let p = tm.tail_upper(ci.normalizer * ci.radius).probability;
        assert!((p - 0.01).abs() < 1e-14);
    }

    #[test]
    fn lp_tail_examples() {
        let tm = model(1.0, 1);
        assert_eq!(tm.lp_tail_upper(0.7, 0.7).probability, 1.0);
        assert!((tm.lp_tail_upper(1.0, 0.0).probability - (-1.0f64).exp()).abs() < 1e-15);
        let b = tm.lp_tail_upper(0.5, 0.7);
        assert!(b.vacuous && b.probability == 1.0);
        // same exponent as the pointwise bound
        let tm = model(2.5, 3);
        let u: f64 = 3.0;
        let lp = -tm.lp_tail_upper(u, 0.0).probability.ln();
        let pw = -(tm.tail_upper(u).probability / 2.0).ln();
        assert!((lp - pw).abs() < 1e-12);
    }

    #[test]
    fn lower_bound() {
        let tm = model(2.0, 1);
        assert!((tm.tail_lower(1.0).probability - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(tm.lower_dominates_upper());
        let tm = tm.with_c_upper(2.0);
        assert!(!tm.lower_dominates_upper());
    }

    #[test]
    fn convergence_terms() {
        let tm = model(1.0, 1);
        let ct = tm.as_convergence_terms(1.0, 1).unwrap();
        assert!((ct.terms[0] - 0.367_879_44).abs() < 1e-8);
        assert!(tm.as_convergence_terms(0.5, 10).is_err());
        let ct = tm.as_convergence_terms(2.0, 100).unwrap();
        assert_eq!(ct.terms.len(), 100);
        assert!((ct.series_bound - 2f64.powf(-3.0)).abs() < 1e-15);
    }

    #[test]
    fn conjugate_search_passes_local_peak_below_boundary() {
        // lambda u - lambda^2 peaks at m, then the outer branch climbs again
        let tm = model(2.0, 1);
        let m = tm.regime_m(1000).unwrap();
        let q = tm.exponent_q();
        let u = 630.9573;
        let numeric = fenchel_conjugate(|l| phi_with_boundary(m, q, l), u, &SearchSettings::default()).unwrap();
        let closed = phi_conjugate_closed_form(m, q, u);
        assert!(closed > m * u - m * m);
        assert!((numeric - closed).abs() <= 1e-9 * closed);
    }
}
