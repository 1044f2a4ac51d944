use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{CoreError, Result};

/// Per-state terms `l(i, x)` with `L(x) = (1/M) sum_i l(i, x) + l0(x) + C`.
#[derive(Debug)]
pub struct LikelihoodOracle {
    m: usize,
    n_states: usize,
    /// `table[x * m + i]`.
    table: Vec<f64>,
    sigma: f64,
    l0: Vec<f64>,
    c: f64,
    queries: AtomicU64,
}

impl Clone for LikelihoodOracle {
    fn clone(&self) -> Self {
        Self {
            m: self.m,
            n_states: self.n_states,
            table: self.table.clone(),
            sigma: self.sigma,
            l0: self.l0.clone(),
            c: self.c,
            queries: AtomicU64::new(self.queries()),
        }
    }
}

impl LikelihoodOracle {
    /// `terms[x][i] = l(i, x)`. With `sigma = None` the tightest bound is used.
    pub fn new(terms: Vec<Vec<f64>>, l0: Vec<f64>, c: f64, sigma: Option<f64>) -> Result<Self> {
        let n_states = terms.len();
        if n_states == 0 {
            return Err(CoreError::Invalid("oracle needs at least one state".into()));
        }
        let m = terms[0].len();
        if m == 0 || terms.iter().any(|t| t.len() != m) {
            return Err(CoreError::Invalid("every state needs the same positive number of terms".into()));
        }
        if l0.len() != n_states {
            return Err(CoreError::Invalid("l0 length differs from the state count".into()));
        }
        if terms.iter().flatten().chain(&l0).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(CoreError::Invalid("oracle values must be finite".into()));
        }
        let table: Vec<f64> = terms.into_iter().flatten().collect();
        let mut oracle = Self { m, n_states, table, sigma: 0.0, l0, c, queries: AtomicU64::new(0) };
        let worst = (0..n_states).map(|x| oracle.sample_variance(x)).fold(0.0, f64::max);
        oracle.sigma = match sigma {
            None => worst.sqrt(),
            Some(s) => {
                if !(s >= 0.0) || s * s < worst * (1.0 - 1e-12) - 1e-300 {
                    return Err(CoreError::Assumption(format!(
                        "variance bound {} below the largest sample variance {worst}",
                        s * s
                    )));
                }
                s
            }
        };
        Ok(oracle)
    }

    /// Oracle with `C` chosen so that `min_x L(x) = 0`.
    pub fn normalized(terms: Vec<Vec<f64>>, l0: Vec<f64>, sigma: Option<f64>) -> Result<Self> {
        let mut o = Self::new(terms, l0, 0.0, sigma)?;
        let min = (0..o.n_states).map(|x| o.l_sum(x) + o.l0[x]).fold(f64::INFINITY, f64::min);
        o.c = -min;
        Ok(o)
    }

    pub fn terms_per_state(&self) -> usize {
        self.m
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn l0(&self) -> &[f64] {
        &self.l0
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn terms(&self, x: usize) -> &[f64] {
        &self.table[x * self.m..(x + 1) * self.m]
    }

    pub fn term(&self, i: usize, x: usize) -> f64 {
        self.table[x * self.m + i]
    }

    pub fn l_sum(&self, x: usize) -> f64 {
        self.terms(x).iter().sum::<f64>() / self.m as f64
    }

    pub fn sample_variance(&self, x: usize) -> f64 {
        let mu = self.l_sum(x);
        let sq = self.terms(x).iter().map(|v| v * v).sum::<f64>() / self.m as f64;
        (sq - mu * mu).max(0.0)
    }

    pub fn likelihood(&self, x: usize) -> f64 {
        self.l_sum(x) + self.l0[x] + self.c
    }

    pub fn likelihoods(&self) -> Vec<f64> {
        (0..self.n_states).map(|x| self.likelihood(x)).collect()
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Adds `n` queries, saturating at `u64::MAX`.
    pub fn charge(&self, n: u64) {
        let _ = self.queries.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |q| Some(q.saturating_add(n)));
    }

    /// Copy with every term scaled by `s` and the variance bound by `|s|`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let terms = (0..self.n_states).map(|x| self.terms(x).iter().map(|v| v * s).collect()).collect();
        Self::new(terms, self.l0.clone(), self.c * s, Some(self.sigma * s.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_and_variance() {
        let o = LikelihoodOracle::new(vec![vec![0.0, 1.0, 2.0, 3.0], vec![2.0; 4]], vec![0.5, 0.0], 1.0, None).unwrap();
        assert_eq!(o.l_sum(0), 1.5);
        assert!((o.sample_variance(0) - 1.25).abs() < 1e-15);
        assert_eq!(o.sample_variance(1), 0.0);
        assert!((o.sigma() - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(o.likelihood(0), 3.0);
        o.charge(5);
        o.charge(2);
        assert_eq!(o.queries(), 7);
    }

    #[test]
    fn rejects_small_sigma() {
        let r = LikelihoodOracle::new(vec![vec![0.0, 2.0]], vec![0.0], 0.0, Some(0.5));
        assert!(matches!(r, Err(CoreError::Assumption(_))));
    }

    #[test]
    fn normalized_minimum_is_zero() {
        let o = LikelihoodOracle::normalized(vec![vec![-3.0, -1.0], vec![4.0, 0.0]], vec![1.0, 0.0], None).unwrap();
        let l = o.likelihoods();
        assert_eq!(l.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(l[1], 3.0);
    }
}
