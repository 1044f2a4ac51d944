use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cdf::{cdf_qmci, PreparedState, Side};
use crate::error::{CoreError, Result};
use crate::markov::StateSpace;

/// One end of an equal-tailed credible interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleQuery {
    pub axis: usize,
    /// Total tail mass left outside the interval.
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    pub side: Side,
}

impl CredibleQuery {
    pub fn new(axis: usize, alpha: f64, eps: f64, delta: f64, side: Side) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CoreError::Invalid(format!("credibility level {alpha} outside (0,1)")));
        }
        if !(eps > 0.0 && eps < alpha / 2.0) {
            return Err(CoreError::Invalid(format!("accuracy {eps} must lie in (0, alpha/2)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CoreError::Invalid(format!("failure budget {delta} outside (0,1)")));
        }
        Ok(Self { axis, alpha, eps, delta, side })
    }

    pub fn level(&self) -> f64 {
        self.alpha / 2.0
    }
}

/// `n_max = ceil(log2(n - 2)) + 1`, and 1 for grids of two or fewer points.
pub fn search_iterations(n: usize) -> usize {
    if n <= 3 {
        1
    } else {
        ((n - 2) as f64).log2().ceil() as usize + 1
    }
}

/// Per-call failure budget `delta / (n_max + 1)`.
pub fn per_call_failure(delta: f64, n: usize) -> f64 {
    delta / (search_iterations(n) + 1) as f64
}

/// Source of `eps/3`-accurate tail estimates for the search.
pub trait TailEstimator {
    fn tail(&mut self, side: Side, a: f64, eps: f64, delta: f64) -> Result<(f64, u128)>;
}

impl<F: FnMut(Side, f64) -> f64> TailEstimator for F {
    fn tail(&mut self, side: Side, a: f64, _eps: f64, _delta: f64) -> Result<(f64, u128)> {
        Ok((self(side, a), 0))
    }
}

/// Amplitude estimation against a prepared state.
pub struct QmciTail<'a, R: Rng> {
    pub prep: &'a PreparedState,
    pub space: &'a StateSpace,
    pub axis: usize,
    pub rng: R,
}

impl<R: Rng> TailEstimator for QmciTail<'_, R> {
    fn tail(&mut self, side: Side, a: f64, eps: f64, delta: f64) -> Result<(f64, u128)> {
        let e = cdf_qmci(self.prep, self.space, self.axis, side, a, eps, delta, &mut self.rng)?;
        Ok((e.estimate, e.queries))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchCall {
    /// Position in the search order, starting at 1.
    pub rank: usize,
    pub point: f64,
    pub estimate: f64,
    pub queries: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CredibleSearch {
    pub query: CredibleQuery,
    /// `None` on the early stop with no output.
    pub bound: Option<f64>,
    /// Loop iterations after the first-point check.
    pub iterations: usize,
    pub n_max: usize,
    pub failure_per_call: f64,
    pub calls: Vec<SearchCall>,
    pub queries: u128,
}

/// Points of `axis` in search order: ascending for the upper bound,
/// descending for the mirrored lower-bound search.
pub fn search_order(space: &StateSpace, axis: usize, side: Side) -> Result<Vec<f64>> {
    if axis >= space.dimension() {
        return Err(CoreError::Invalid(format!("axis {axis} outside a {}-dimensional space", space.dimension())));
    }
    let mut v = space.axis(axis).to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if side == Side::Lower {
        v.reverse();
    }
    Ok(v)
}

/// Binary search over the sorted axis for a point whose tail mass is within
/// `eps` of `alpha/2`, accepting estimates inside the `2 eps / 3` window.
pub fn credible_bound_search(query: &CredibleQuery, space: &StateSpace, est: &mut dyn TailEstimator) -> Result<CredibleSearch> {
    let xs = search_order(space, query.axis, query.side)?;
    let n = xs.len();
    let n_max = search_iterations(n);
    let fail = per_call_failure(query.delta, n);
    let eps_call = query.eps / 3.0;
    let window = 2.0 * query.eps / 3.0;
    let level = query.level();
    let mut out = CredibleSearch {
        query: *query,
        bound: None,
        iterations: 0,
        n_max,
        failure_per_call: fail,
        calls: Vec::new(),
        queries: 0,
    };
    let mut probe = |j: usize, out: &mut CredibleSearch| -> Result<f64> {
        let (value, queries) = est.tail(query.side, xs[j - 1], eps_call, fail)?;
        out.calls.push(SearchCall { rank: j, point: xs[j - 1], estimate: value, queries });
        out.queries = out.queries.saturating_add(queries);
        Ok(value)
    };

    let first = probe(1, &mut out)?;
    if (first - level).abs() <= window {
        out.bound = Some(xs[0]);
        return Ok(out);
    }
    if first < level - window || n == 1 {
        return Ok(out);
    }
    let (mut lb, mut ub) = (1usize, n);
    let mut mid;
    loop {
        mid = (ub + lb).div_ceil(2);
        out.iterations += 1;
        let v = probe(mid, &mut out)?;
        if (v - level).abs() <= window {
            break;
        } else if v > level + window {
            lb = mid;
        } else {
            ub = mid;
        }
        if ub - lb == 1 {
            break;
        }
    }
    out.bound = Some(xs[mid - 1]);
    Ok(out)
}

/// Both ends of the interval, each at failure `delta / 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CredibleInterval {
    pub lower: CredibleSearch,
    pub upper: CredibleSearch,
}

impl CredibleInterval {
    pub fn bounds(&self) -> Option<(f64, f64)> {
        Some((self.lower.bound?, self.upper.bound?))
    }

    pub fn queries(&self) -> u128 {
        self.lower.queries.saturating_add(self.upper.queries)
    }
}

pub fn credible_interval(
    axis: usize,
    alpha: f64,
    eps: f64,
    delta: f64,
    space: &StateSpace,
    est: &mut dyn TailEstimator,
) -> Result<CredibleInterval> {
    let upper = credible_bound_search(&CredibleQuery::new(axis, alpha, eps, delta / 2.0, Side::Upper)?, space, est)?;
    let lower = credible_bound_search(&CredibleQuery::new(axis, alpha, eps, delta / 2.0, Side::Lower)?, space, est)?;
    Ok(CredibleInterval { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::cdf::tail_exact;

    fn line(n: usize) -> StateSpace {
        StateSpace::line((0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn iteration_budget() {
        assert_eq!(search_iterations(16), 5);
        assert_eq!(search_iterations(3), 1);
        assert_eq!(search_iterations(10), 4);
        assert!((per_call_failure(0.1, 16) - 0.1 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn exact_estimates_find_the_quartile() {
        let s = line(16);
        let w: Vec<f64> = (0..16).map(|i| (-(i as f64 - 7.5).powi(2) / 18.0).exp()).collect();
        let z: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|v| v / z).collect();
        let q = CredibleQuery::new(0, 0.5, 0.05, 0.1, Side::Upper).unwrap();
        let mut exact = |side, a| tail_exact(&p, &s, 0, side, a).unwrap();
        let out = credible_bound_search(&q, &s, &mut exact).unwrap();
        let b = out.bound.unwrap();
        assert!((tail_exact(&p, &s, 0, Side::Upper, b).unwrap() - 0.25).abs() <= 0.05);
        assert!(out.iterations <= out.n_max);
        let lo = credible_bound_search(&CredibleQuery { side: Side::Lower, ..q }, &s, &mut exact).unwrap();
        assert!((tail_exact(&p, &s, 0, Side::Lower, lo.bound.unwrap()).unwrap() - 0.25).abs() <= 0.05);
        assert!(lo.bound.unwrap() < b);
    }

    #[test]
    fn early_stop_without_output() {
        let s = line(5);
        let q = CredibleQuery::new(0, 0.9, 0.05, 0.1, Side::Upper).unwrap();
        let mut low = |_: Side, _: f64| 0.1;
        let out = credible_bound_search(&q, &s, &mut low).unwrap();
        assert_eq!(out.bound, None);
        assert_eq!(out.calls.len(), 1);
    }

    #[test]
    fn median_of_symmetric_odd_grid() {
        let s = line(7);
        let p = [0.05, 0.1, 0.15, 0.4, 0.15, 0.1, 0.05];
        let q = CredibleQuery::new(0, 0.6, 0.29, 0.1, Side::Upper).unwrap();
        let mut exact = |side, a| tail_exact(&p, &s, 0, side, a).unwrap();
        assert_eq!(credible_bound_search(&q, &s, &mut exact).unwrap().bound, Some(3.0));
    }

    #[test]
    fn rejects_wide_accuracy() {
        assert!(CredibleQuery::new(0, 0.5, 0.3, 0.1, Side::Upper).is_err());
    }
}
