use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annealing::nae::{folded_pmf, median_pmf};
use crate::error::{CoreError, Result};
use crate::markov::{tv_distance, StateSpace};
use crate::qmci::QsaQmciOutcome;

/// Which tail of the marginal is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `P(x_i > a)`, used for the upper bound.
    Upper,
    /// `P(x_i < a)`, the mirrored tail used for the lower bound.
    Lower,
}

impl Side {
    fn counts(self, v: f64, a: f64) -> bool {
        match self {
            Side::Upper => v > a,
            Side::Lower => v < a,
        }
    }
}

fn check_axis(space: &StateSpace, axis: usize, n: usize) -> Result<()> {
    if axis >= space.dimension() {
        return Err(CoreError::Invalid(format!("axis {axis} outside a {}-dimensional space", space.dimension())));
    }
    if n != space.len() {
        return Err(CoreError::Invalid(format!("distribution has {n} entries for {} states", space.len())));
    }
    Ok(())
}

/// Tail mass on one side of `a` along `axis`, by enumeration.
pub fn tail_exact(p: &[f64], space: &StateSpace, axis: usize, side: Side, a: f64) -> Result<f64> {
    check_axis(space, axis, p.len())?;
    Ok(p.iter().enumerate().filter(|(x, _)| side.counts(space.value(*x, axis), a)).map(|(_, w)| w).sum::<f64>() + 0.0)
}

/// `Phi(a) = P(x_i > a)`.
pub fn cdf_exact(p: &[f64], space: &StateSpace, axis: usize, a: f64) -> Result<f64> {
    tail_exact(p, space, axis, Side::Upper, a)
}

/// Output of a state-preparation circuit, as seen by amplitude estimation.
#[derive(Debug, Clone, Serialize)]
pub struct PreparedState {
    /// `R_S` distribution of the prepared state.
    pub distribution: Vec<f64>,
    /// Oracle queries per use of the preparation circuit.
    pub charge: u128,
    /// Queries spent once to find the schedule.
    pub setup_queries: u128,
    /// `sqrt(2 - 2|<P~|state>|)` against the ideal encoding of `P~`.
    pub distance: f64,
    /// TV distance of `distribution` from the exact target.
    pub tv: f64,
}

impl PreparedState {
    /// Perfect preparation of `p` at a given per-use charge.
    pub fn exact(p: Vec<f64>, charge: u128) -> Self {
        Self { distribution: p, charge, setup_queries: 0, distance: 0.0, tv: 0.0 }
    }

    /// Preparation circuit produced by a successful annealing run.
    pub fn from_anneal(out: &QsaQmciOutcome) -> Result<Self> {
        let (Some(gen), Some(sampled)) = (&out.generated, &out.sampled) else {
            return Err(CoreError::Assumption("annealing schedule failed; no preparation circuit".into()));
        };
        Ok(Self {
            distribution: sampled.clone(),
            charge: gen.walk_calls.saturating_mul(out.queries_per_walk as u128),
            setup_queries: out.schedule.walk_calls().saturating_mul(out.queries_per_walk as u128),
            distance: gen.distance,
            tv: tv_distance(sampled, &out.p),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfEstimate {
    pub side: Side,
    pub point: f64,
    pub estimate: f64,
    /// Tail mass of the prepared state, the quantity amplitude estimation targets.
    pub prepared: f64,
    pub levels: usize,
    pub reps: usize,
    /// Probability that the median lands within the estimation accuracy of `prepared`.
    pub success_probability: f64,
    pub queries: u128,
}

/// Smallest power of two `K` with `pi/K + pi^2/K^2 <= acc`.
pub fn ae_levels(acc: f64) -> usize {
    let pi = std::f64::consts::PI;
    let mut k = 2usize;
    while pi / k as f64 + (pi / k as f64).powi(2) > acc {
        k *= 2;
    }
    k
}

/// Odd median count `ceil(ln(1/delta) / 0.19)`.
pub fn ae_reps(delta: f64) -> usize {
    (((1.0 / delta).ln() / 0.19).ceil().max(1.0) as usize) | 1
}

/// Tail-mass estimate from amplitude estimation of the comparator flag
/// against the prepared state, at accuracy `eps/3` on the prepared mass.
///
/// Each repetition applies the preparation once and the Grover iterate
/// `K - 1` times, two preparations per iterate.
#[allow(clippy::too_many_arguments)]
pub fn cdf_qmci<R: Rng + ?Sized>(
    prep: &PreparedState,
    space: &StateSpace,
    axis: usize,
    side: Side,
    a: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<CdfEstimate> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(CoreError::Invalid(format!("CDF accuracy {eps} and failure {delta} must lie in (0,1)")));
    }
    let total: f64 = prep.distribution.iter().sum();
    let prepared = (tail_exact(&prep.distribution, space, axis, side, a)? / total).clamp(0.0, 1.0);
    let acc = eps / 3.0;
    let levels = ae_levels(acc);
    let reps = ae_reps(delta);
    let theta = prepared.sqrt().asin();
    let pmf = median_pmf(&folded_pmf(2.0 * theta, levels), reps);
    let value_of = |r: usize| (std::f64::consts::PI * r as f64 / levels as f64).sin().powi(2);
    let mass: f64 = pmf.iter().sum();
    let success_probability =
        pmf.iter().enumerate().filter(|(r, _)| (value_of(*r) - prepared).abs() <= acc).map(|(_, p)| p).sum::<f64>() / mass;
    let mut u = rng.random::<f64>() * mass;
    let mut pick = pmf.len() - 1;
    for (r, p) in pmf.iter().enumerate() {
        if u < *p {
            pick = r;
            break;
        }
        u -= p;
    }
    let per_rep = 2 * (levels as u128 - 1) + 1;
    Ok(CdfEstimate {
        side,
        point: a,
        estimate: value_of(pick),
        prepared,
        levels,
        reps,
        success_probability: success_probability.min(1.0),
        queries: (reps as u128 * per_rep).saturating_mul(prep.charge),
    })
}
