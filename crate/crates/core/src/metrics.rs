//! Error summaries of grid estimates against a known density.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Exponent of an `L_p` norm; `Sup` is the uniform norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormOrder {
    Finite(f64),
    Sup,
}

impl NormOrder {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Self::Sup)
        } else if p >= 1.0 && p.is_finite() {
            Ok(Self::Finite(p))
        } else {
            Err(contract(format!("norm exponent must be >= 1, got {p}")))
        }
    }

    fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(p) => write!(f, "{p}"),
            NormOrder::Sup => f.write_str("inf"),
        }
    }
}

/// `(sum w_i |v_i|^p)^{1/p}`, or `max |v_i|` for [`NormOrder::Sup`].
pub fn lp_norm(values: &[f64], weights: &[f64], p: NormOrder) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: values.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(contract(format!("negative measure weight {w}")));
    }
    Ok(match p {
        NormOrder::Sup => values.iter().map(|v| v.abs()).fold(0.0, f64::max),
        NormOrder::Finite(p) => {
            if p < 1.0 {
                return Err(contract(format!("norm exponent must be >= 1, got {p}")));
            }
            let s: f64 = values.iter().zip(weights).map(|(v, w)| w * v.abs().powf(p)).sum();
            s.powf(1.0 / p)
        }
    })
}

/// Running per-point mean and sum of squared deviations (Welford), mergeable
/// across workers with the Chan et al. update.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationAccumulator {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    /// Running mean of `(v - truth)^2`.
    mse: Vec<f64>,
    truth: Vec<f64>,
}

impl ReplicationAccumulator {
    pub fn new(truth: Vec<f64>) -> Self {
        let len = truth.len();
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
            mse: vec![0.0; len],
            truth,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.truth.len() {
            return Err(Error::DimensionMismatch {
                expected: self.truth.len(),
                found: values.len(),
            });
        }
        self.count += 1;
        let c = self.count as f64;
        for (i, &v) in values.iter().enumerate() {
            let delta = v - self.mean[i];
            self.mean[i] += delta / c;
            self.m2[i] += delta * (v - self.mean[i]);
            let e = v - self.truth[i];
            self.mse[i] += (e * e - self.mse[i]) / c;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.truth != self.truth {
            return Err(contract("cannot merge accumulators with different truths"));
        }
        if other.count == 0 {
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
            self.mse[i] = (self.mse[i] * na + other.mse[i] * nb) / n;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn finish(&self) -> Result<BiasVariance> {
        if self.count < 2 {
            return Err(contract("bias/variance decomposition needs at least 2 replications"));
        }
        let m = self.count as f64;
        Ok(BiasVariance {
            replications: self.count,
            mean: self.mean.clone(),
            bias: self.mean.iter().zip(&self.truth).map(|(a, t)| a - t).collect(),
            variance: self.m2.iter().map(|s| s / (m - 1.0)).collect(),
            mse: self.mse.clone(),
        })
    }
}

/// Pointwise bias, unbiased variance and mean squared error over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    pub replications: usize,
    pub mean: Vec<f64>,
    pub bias: Vec<f64>,
    pub variance: Vec<f64>,
    pub mse: Vec<f64>,
}

pub fn bias_variance_decompose(replicated: &[Vec<f64>], truth: &[f64]) -> Result<BiasVariance> {
    let mut acc = ReplicationAccumulator::new(truth.to_vec());
    for r in replicated {
        acc.push(r)?;
    }
    acc.finish()
}

/// Norm errors of one estimate, plus pointwise bias/variance when the
/// estimate comes from replicated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub normalizer: f64,
    /// Keyed by the exponent as written (`"1"`, `"2"`, `"inf"`).
    pub lp_errors: BTreeMap<String, f64>,
    pub sup_error: f64,
    /// `normalizer * lp_errors`.
    pub normalized: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointwise_bias: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointwise_variance: Option<Vec<f64>>,
}

impl ErrorReport {
    pub fn new(values: &[f64], truth: &[f64], weights: &[f64], orders: &[NormOrder], normalizer: f64) -> Result<Self> {
        if values.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: values.len(),
            });
        }
        let diff: Vec<f64> = values.iter().zip(truth).map(|(a, b)| a - b).collect();
        let mut lp_errors = BTreeMap::new();
        for p in orders {
            lp_errors.insert(p.key(), lp_norm(&diff, weights, *p)?);
        }
        let sup_error = lp_norm(&diff, weights, NormOrder::Sup)?;
        let normalized = lp_errors.iter().map(|(k, v)| (k.clone(), normalizer * v)).collect();
        Ok(Self {
            normalizer,
            lp_errors,
            sup_error,
            normalized,
            pointwise_bias: None,
            pointwise_variance: None,
        })
    }

    pub fn with_replications(mut self, bv: &BiasVariance) -> Self {
        self.pointwise_bias = Some(bv.bias.iter().map(|b| b.abs()).collect());
        self.pointwise_variance = Some(bv.variance.clone());
        self
    }

    /// `p,error,normalized_error` rows in key order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,error,normalized_error\n");
        for (p, e) in &self.lp_errors {
            out.push_str(&format!("{p},{e},{}\n", self.normalized[p]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_under_probability_measure() {
        let w = vec![0.25; 4];
        for p in [1.0, 2.0, 3.5] {
            let v = lp_norm(&[2.5; 4], &w, NormOrder::Finite(p)).unwrap();
            assert!((v - 2.5).abs() < 1e-14);
        }
        assert_eq!(lp_norm(&[2.5; 4], &w, NormOrder::Sup).unwrap(), 2.5);
    }

    #[test]
    fn hand_examples() {
        let v = lp_norm(&[3.0, 4.0], &[0.5, 0.5], NormOrder::Finite(2.0)).unwrap();
        assert!((v - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&[-5.0, 2.0], &[0.5, 0.5], NormOrder::Sup).unwrap(), 5.0);
        assert!(lp_norm(&[1.0], &[-1.0], NormOrder::Finite(1.0)).is_err());
        assert!(NormOrder::new(0.5).is_err());
        assert_eq!(NormOrder::new(f64::INFINITY).unwrap(), NormOrder::Sup);
    }

    #[test]
    fn identical_replications() {
        let t = vec![1.0, 2.0];
        let bv = bias_variance_decompose(&[t.clone(), t.clone(), t.clone()], &t).unwrap();
        assert_eq!(bv.bias, vec![0.0, 0.0]);
        assert_eq!(bv.variance, vec![0.0, 0.0]);
    }

    #[test]
    fn symmetric_pair() {
        let t = vec![3.0];
        let bv = bias_variance_decompose(&[vec![2.0], vec![4.0]], &t).unwrap();
        assert_eq!(bv.bias, vec![0.0]);
        assert_eq!(bv.variance, vec![2.0]);
        assert!(bias_variance_decompose(&[vec![2.0]], &t).is_err());
        assert!(bias_variance_decompose(&[vec![2.0], vec![1.0, 2.0]], &t).is_err());
    }

    #[test]
    fn merge_matches_sequential() {
        let truth = vec![0.5, -1.0];
        let reps: Vec<Vec<f64>> = (0..9).map(|i| vec![0.1 * i as f64, (i as f64).sin()]).collect();
        let mut all = ReplicationAccumulator::new(truth.clone());
        let mut a = ReplicationAccumulator::new(truth.clone());
        let mut b = ReplicationAccumulator::new(truth.clone());
        for (i, r) in reps.iter().enumerate() {
            all.push(r).unwrap();
            if i < 4 { a.push(r).unwrap() } else { b.push(r).unwrap() }
        }
        a.merge(&b).unwrap();
        let (x, y) = (all.finish().unwrap(), a.finish().unwrap());
        for i in 0..2 {
            assert!((x.variance[i] - y.variance[i]).abs() < 1e-14);
            assert!((x.mse[i] - y.mse[i]).abs() < 1e-14);
            assert!((x.bias[i] - y.bias[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn report_normalization_and_csv() {
        let r = ErrorReport::new(
            &[1.0, 3.0],
            &[0.0, 0.0],
            &[0.5, 0.5],
            &[NormOrder::Finite(1.0), NormOrder::Finite(2.0), NormOrder::Sup],
            2.0,
        )
        .unwrap();
        assert_eq!(r.lp_errors["1"], 2.0);
        assert_eq!(r.normalized["1"], 4.0);
        assert_eq!(r.sup_error, 3.0);
        assert_eq!(r.normalized["inf"], 6.0);
        assert_eq!(r.to_csv(), format!("p,error,normalized_error\n1,2,4\n2,{},{}\ninf,3,6\n", r.lp_errors["2"], 2.0 * r.lp_errors["2"]));
    }
}
