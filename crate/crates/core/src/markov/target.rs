use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Target `P_beta(x) = P0(x) exp(-beta L(x)) / Z_beta` on an enumerated space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    prior: Vec<f64>,
    neg_log_lik: Vec<f64>,
    beta: f64,
}

impl TargetModel {
    pub fn new(prior: Vec<f64>, neg_log_lik: Vec<f64>) -> Result<Self> {
        if prior.is_empty() || prior.len() != neg_log_lik.len() {
            return Err(CoreError::Invalid(format!(
                "prior has {} entries, likelihood has {}",
                prior.len(),
                neg_log_lik.len()
            )));
        }
        if prior.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(CoreError::Invalid("prior must be strictly positive".into()));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CoreError::Invalid(format!("prior sums to {total}, not 1")));
        }
        if neg_log_lik.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(CoreError::Invalid("negative log-likelihood must be finite and nonnegative".into()));
        }
        Ok(Self { prior, neg_log_lik, beta: 1.0 })
    }

    /// Uniform prior over `L.len()` states.
    pub fn with_uniform_prior(neg_log_lik: Vec<f64>) -> Result<Self> {
        let n = neg_log_lik.len().max(1);
        Self::new(vec![1.0 / n as f64; neg_log_lik.len()], neg_log_lik)
    }

    /// Model whose normalized target is exactly `p` at `beta = 1`
    /// (uniform prior, `L = -ln p + ln p_max`).
    pub fn from_distribution(p: &[f64]) -> Result<Self> {
        if p.iter().any(|&v| !(v > 0.0)) {
            return Err(CoreError::Invalid("target distribution must be strictly positive".into()));
        }
        let pmax = p.iter().cloned().fold(0.0, f64::max);
        Self::with_uniform_prior(p.iter().map(|&v| (pmax / v).ln()).collect())
    }

    pub fn at_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn with_likelihood(&self, neg_log_lik: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(self.prior.clone(), neg_log_lik)?;
        m.beta = self.beta;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.prior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prior.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn neg_log_lik(&self) -> &[f64] {
        &self.neg_log_lik
    }

    /// `ln p(x)` for the unnormalized target.
    pub fn log_unnormalized(&self, x: usize) -> f64 {
        self.prior[x].ln() - self.beta * self.neg_log_lik[x]
    }

    pub fn unnormalized(&self, x: usize) -> f64 {
        self.log_unnormalized(x).exp()
    }

    /// Normalized `P_beta`, computed with a log-sum-exp shift.
    pub fn distribution(&self) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.len()).map(|x| self.log_unnormalized(x)).collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }

    /// `E_{P0}[L]`.
    pub fn prior_mean_likelihood(&self) -> f64 {
        self.prior.iter().zip(&self.neg_log_lik).map(|(p, l)| p * l).sum()
    }

    pub fn max_likelihood(&self) -> f64 {
        self.neg_log_lik.iter().cloned().fold(0.0, f64::max)
    }
}
