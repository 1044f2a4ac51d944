use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::markov::{ChainSample, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalInterval {
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
}

/// Empirical `100 alpha/2` and `100 (1 - alpha/2)` percentiles.
///
/// The upper bound is the smallest sample with at most `alpha/2` of the
/// samples strictly above it, the lower bound its mirror. At `alpha = 1`
/// both collapse onto the central order statistics, a zero-width interval
/// for an odd sample count.
pub fn percentile_interval(values: &[f64], alpha: f64) -> Result<ClassicalInterval> {
    if values.is_empty() {
        return Err(CoreError::Invalid("percentile interval needs at least one sample".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CoreError::Invalid(format!("credibility level {alpha} outside (0,1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let tail = alpha / 2.0 * n as f64;
    let lo = (tail.floor() as usize).min((n - 1) / 2);
    let hi = n - 1 - lo;
    Ok(ClassicalInterval { lower: v[lo], upper: v[hi], samples: n })
}

/// Percentile interval of the post-burn-in chain states along `axis`.
pub fn classical_credible(sample: &ChainSample, space: &StateSpace, axis: usize, alpha: f64) -> Result<ClassicalInterval> {
    if axis >= space.dimension() {
        return Err(CoreError::Invalid(format!("axis {axis} outside a {}-dimensional space", space.dimension())));
    }
    let values: Vec<f64> = sample.kept().iter().map(|&x| space.value(x, axis)).collect();
    percentile_interval(&values, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let r = percentile_interval(&[2.5; 7], 0.3).unwrap();
        assert_eq!((r.lower, r.upper), (2.5, 2.5));
    }

    #[test]
    fn ranks_on_small_sets() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let r = percentile_interval(&v, 0.2).unwrap();
        // one sample strictly outside on each side
        assert_eq!((r.lower, r.upper), (1.0, 8.0));
        let m = percentile_interval(&v, 1.0).unwrap();
        assert_eq!((m.lower, m.upper), (4.0, 5.0));
        let odd = percentile_interval(&v[..9], 1.0).unwrap();
        assert_eq!((odd.lower, odd.upper), (4.0, 4.0));
        assert!(percentile_interval(&[], 0.5).is_err());
    }
}
