//! Bandwidth schedules `h_k`, the normalizer `B_n`, and the bias/variance
//! proxy that the optimal schedule balances.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Integer and fractional parts of a smoothness index together with its
/// Hölder constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClass {
    pub beta: f64,
    pub holder_const: f64,
}

impl SmoothnessClass {
    pub fn new(beta: f64, holder_const: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(contract(format!("smoothness beta must be positive, got {beta}")));
        }
        if !(holder_const > 0.0 && holder_const.is_finite()) {
            return Err(contract(format!("Hölder constant must be positive, got {holder_const}")));
        }
        Ok(Self { beta, holder_const })
    }

    /// Largest integer `j >= 0` with `j <= beta`.
    pub fn integer_part(&self) -> usize {
        self.beta.floor() as usize
    }

    pub fn fractional_part(&self) -> f64 {
        self.beta - self.beta.floor()
    }
}

/// `h_k = c2 (ln k)^gamma k^{-a}` for `k >= 2` and `h_1 = c2`, where the
/// exponent `a` is `1 / (2 beta + d)` unless overridden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSchedule {
    pub c2: f64,
    pub beta: f64,
    pub dim: usize,
    #[serde(default)]
    pub log_gamma: f64,
    /// Replaces `1 / (2 beta + d)`; used to probe non-optimal schedules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_override: Option<f64>,
}

impl BandwidthSchedule {
    pub fn optimal(beta: f64, dim: usize) -> Self {
        Self {
            c2: 1.0,
            beta,
            dim,
            log_gamma: 0.0,
            exponent_override: None,
        }
    }

    pub fn with_c2(mut self, c2: f64) -> Self {
        self.c2 = c2;
        self
    }

    /// Log-corrected variant aimed at sup-norm estimation. Experimental.
    pub fn with_log_gamma(mut self, gamma: f64) -> Self {
        self.log_gamma = gamma;
        self
    }

    pub fn with_exponent(mut self, exponent: f64) -> Self {
        self.exponent_override = Some(exponent);
        self
    }

    /// Constant schedule `h_k = h`.
    pub fn constant(h: f64, beta: f64, dim: usize) -> Self {
        Self::optimal(beta, dim).with_c2(h).with_exponent(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(contract("bandwidth c2 must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(contract("bandwidth beta must be positive"));
        }
        if self.dim == 0 {
            return Err(contract("bandwidth dimension must be positive"));
        }
        if !(self.log_gamma >= 0.0 && self.log_gamma.is_finite()) {
            return Err(contract("bandwidth gamma must be nonnegative"));
        }
        if let Some(a) = self.exponent_override {
            if !a.is_finite() {
                return Err(contract("bandwidth exponent must be finite"));
            }
        }
        Ok(())
    }

    pub fn exponent(&self) -> f64 {
        self.exponent_override
            .unwrap_or(1.0 / (2.0 * self.beta + self.dim as f64))
    }

    pub fn at(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(contract("bandwidth index k must be at least 1"));
        }
        Ok(self.at_unchecked(k))
    }

    #[inline]
    pub(crate) fn at_unchecked(&self, k: u64) -> f64 {
        if k == 1 {
            return self.c2;
        }
        let kf = k as f64;
        let mut h = self.c2 * kf.powf(-self.exponent());
        if self.log_gamma != 0.0 {
            h *= kf.ln().powf(self.log_gamma);
        }
        h
    }

    /// `h_1 .. h_n`.
    pub fn table(&self, n: u64) -> Vec<f64> {
        (1..=n).map(|k| self.at_unchecked(k)).collect()
    }
}

/// `h_k` of `schedule`. Fails for `k = 0`.
pub fn bandwidth_at(schedule: &BandwidthSchedule, k: u64) -> Result<f64> {
    schedule.at(k)
}

/// `B_n = n^{beta / (2 beta + d)}`.
pub fn normalizer(n: u64, beta: f64, dim: usize) -> Result<f64> {
    if n == 0 {
        return Err(contract("normalizer needs n >= 1"));
    }
    if !(beta > 0.0) || dim == 0 {
        return Err(contract("normalizer needs beta > 0 and d >= 1"));
    }
    Ok((n as f64).powf(beta / (2.0 * beta + dim as f64)))
}

/// `(1/n^2) [ sum h_k^{-d} + (sum h_k^beta)^2 ]`, the variance plus squared
/// bias proxy without its unspecified constants.
pub fn target_functional(schedule: &BandwidthSchedule, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(contract("target functional needs n >= 1"));
    }
    let d = schedule.dim as f64;
    let beta = schedule.beta;
    let (mut var_sum, mut bias_sum) = (0.0, 0.0);
    for k in 1..=n {
        let h = schedule.at_unchecked(k);
        var_sum += h.powf(-d);
        bias_sum += h.powf(beta);
    }
    let nf = n as f64;
    let direct = (var_sum + bias_sum * bias_sum) / (nf * nf);
    if direct.is_finite() && direct > 0.0 {
        return Ok(direct);
    }
    // Overflow or underflow somewhere: redo the sums in logarithms.
    let log_h: Vec<f64> = (1..=n).map(|k| schedule.at_unchecked(k).ln()).collect();
    let log_var = log_sum_exp(log_h.iter().map(|l| -d * l));
    let log_bias = log_sum_exp(log_h.iter().map(|l| beta * l));
    Ok((log_add_exp(log_var, 2.0 * log_bias) - 2.0 * nf.ln()).exp())
}

/// `c1 n^{-1} sum_{k<=n} h_k^beta`.
pub fn bias_bound(schedule: &BandwidthSchedule, n: u64, c1: f64) -> Result<f64> {
    if n == 0 {
        return Err(contract("bias bound needs n >= 1"));
    }
    if !(c1 > 0.0) {
        return Err(contract("bias constant c1 must be positive"));
    }
    let sum: f64 = (1..=n).map(|k| schedule.at_unchecked(k).powf(schedule.beta)).sum();
    Ok(c1 * sum / n as f64)
}

pub(crate) fn log_sum_exp<I: Iterator<Item = f64>>(it: I) -> f64 {
    let v: Vec<f64> = it.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = BandwidthSchedule::optimal(1.0, 1);
        assert!((s.at(8).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(s.at(1).unwrap(), 1.0);
        let s = BandwidthSchedule::optimal(2.0, 1);
        assert!((s.at(32).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(s.with_c2(3.5).at(1).unwrap(), 3.5);
        assert!(s.at(0).is_err());
    }

    #[test]
    fn log_corrected_schedule_stays_positive_and_vanishes() {
        let s = BandwidthSchedule::optimal(1.0, 1).with_log_gamma(1.0);
        assert_eq!(s.at(1).unwrap(), 1.0);
        for k in 2..2000 {
            assert!(s.at(k).unwrap() > 0.0);
        }
        assert!(s.at(1u64 << 60).unwrap() < 1e-4);
    }

    #[test]
    fn normalizer_examples() {
        assert!((normalizer(8, 1.0, 1).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(normalizer(1, 2.7, 3).unwrap(), 1.0);
        assert!((normalizer(10_000, 2.0, 1).unwrap() - 39.810_717_055).abs() < 1e-8);
        assert!(normalizer(0, 1.0, 1).is_err());
    }

    #[test]
    fn target_functional_constant_schedule() {
        let (h, beta, d, n) = (0.3, 2.0, 2usize, 50u64);
        let s = BandwidthSchedule::constant(h, beta, d);
        let want = h.powi(-(d as i32)) / n as f64 + h.powf(2.0 * beta);
        assert!((target_functional(&s, n).unwrap() - want).abs() < 1e-12 * want);
        let s = BandwidthSchedule::optimal(1.0, 1);
        assert_eq!(target_functional(&s, 1).unwrap(), 2.0);
    }

    #[test]
    fn target_functional_log_domain_fallback() {
        // sum h^{-2} = 10 * 10^309 overflows, but Z = 10^308 does not.
        let s = BandwidthSchedule::constant(10f64.powf(-154.5), 1.0, 2);
        let z = target_functional(&s, 10).unwrap();
        assert!(z.is_finite());
        assert!((z.log10() - 308.0).abs() < 1e-9, "{z}");
    }

    #[test]
    fn bias_bound_examples() {
        let s = BandwidthSchedule::constant(0.4, 1.5, 1);
        assert!((bias_bound(&s, 77, 2.0).unwrap() - 2.0 * 0.4f64.powf(1.5)).abs() < 1e-13);
        let s = BandwidthSchedule::optimal(1.0, 1).with_c2(0.7);
        assert!((bias_bound(&s, 1, 1.0).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn smoothness_parts() {
        let s = SmoothnessClass::new(0.3, 1.0).unwrap();
        assert_eq!(s.integer_part(), 0);
        let s = SmoothnessClass::new(std::f64::consts::PI, 1.0).unwrap();
        assert_eq!(s.integer_part(), 3);
        assert!((s.fractional_part() - (std::f64::consts::PI - 3.0)).abs() < 1e-15);
        assert_eq!(SmoothnessClass::new(2.0, 1.0).unwrap().integer_part(), 2);
        assert!(SmoothnessClass::new(0.0, 1.0).is_err());
    }
}
