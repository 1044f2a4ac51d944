use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::chain::{acceptance_ratio, ChainModel};
use super::proposal::ProposalKernel;
use super::space::StateSpace;
use super::target::TargetModel;
use crate::error::{CoreError, Result};

/// Output of one MH run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSample {
    /// Every visited state `x_1 .. x_{n_b + n}`.
    pub states: Vec<usize>,
    pub burn_in: usize,
    pub n: usize,
    pub seed: u64,
    /// Number of `L(x)` evaluations spent: one for the start, one per proposal.
    pub likelihood_evaluations: u64,
}

impl ChainSample {
    /// States after burn-in.
    pub fn kept(&self) -> &[usize] {
        &self.states[self.burn_in..]
    }

    pub fn empirical_distribution(&self, len: usize) -> Vec<f64> {
        let mut h = vec![0.0; len];
        for &s in self.kept() {
            h[s] += 1.0;
        }
        let n = self.n as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    }
}

fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    WeightedIndex::new(weights).expect("weights are validated probabilities").sample(rng)
}

/// Metropolis-Hastings with the start drawn from the prior.
pub fn run_mh(
    model: &TargetModel,
    space: &StateSpace,
    t: &ProposalKernel,
    burn_in: usize,
    n: usize,
    seed: u64,
) -> Result<ChainSample> {
    if n == 0 {
        return Err(CoreError::Invalid("run_mh needs n >= 1".into()));
    }
    if model.len() != space.len() || t.len() != space.len() {
        return Err(CoreError::Invalid("model, space and proposal sizes differ".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let move_weights: Vec<f64> = t.moves().iter().map(|m| m.prob).collect();
    let mut x = sample_index(model.prior(), &mut rng);
    let mut evaluations = 1u64;
    let mut states = Vec::with_capacity(burn_in + n);
    for _ in 0..burn_in + n {
        let mv = &t.moves()[sample_index(&move_weights, &mut rng)];
        let y = space.shift(x, &mv.delta);
        evaluations += 1;
        let a = acceptance_ratio(model, t, x, y)?;
        if rng.random::<f64>() < a {
            x = y;
        }
        states.push(x);
    }
    Ok(ChainSample { states, burn_in, n, seed, likelihood_evaluations: evaluations })
}

/// Ergodic average with its mean-square error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expectation {
    pub estimate: f64,
    pub error_bound: f64,
}

/// `S = (1/n) sum f(x_{n_b + i})` and the root of the two-term MSE bound.
pub fn mcmc_expectation(sample: &ChainSample, f: &[f64], chain: &ChainModel, prior: &[f64]) -> Expectation {
    let kept = sample.kept();
    let estimate = kept.iter().map(|&s| f[s]).sum::<f64>() / kept.len() as f64;
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = rudolf_bound(sup, chain, prior, sample.n, sample.burn_in);
    Expectation { estimate, error_bound: bound.sqrt() }
}

/// `max_x |P0(x)/Pi(x) - 1|`.
pub fn start_discrepancy(prior: &[f64], pi: &[f64]) -> f64 {
    prior.iter().zip(pi).map(|(p, q)| (p / q - 1.0).abs()).fold(0.0, f64::max)
}

/// Squared-error bound `2|f|^2/(n D') + 4 r^{1/2} |f|^2 (1-D)^{n_b} / (n^2 D^2)`.
pub fn rudolf_bound(f_sup: f64, chain: &ChainModel, prior: &[f64], n: usize, burn_in: usize) -> f64 {
    let r = start_discrepancy(prior, &chain.pi);
    let f2 = f_sup * f_sup;
    let n = n as f64;
    2.0 * f2 / (n * chain.gap_signed)
        + 4.0 * r.sqrt() * f2 * (1.0 - chain.gap).powi(burn_in as i32) / (n * n * chain.gap * chain.gap)
}

/// `n_b = ceil(ln(max(2, r^{1/2})) / Delta)`.
pub fn recommended_burn_in(chain: &ChainModel, prior: &[f64]) -> usize {
    let r = start_discrepancy(prior, &chain.pi);
    (r.sqrt().max(2.0).ln() / chain.gap).ceil() as usize
}

/// Smallest `n` for which the bound at `burn_in` is at most `eps^2`.
///
/// The bound is `a/n + b/n^2`, so the threshold is the positive root of
/// `eps^2 n^2 - a n - b = 0`.
pub fn classical_sample_count(f_sup: f64, chain: &ChainModel, prior: &[f64], burn_in: usize, eps: f64) -> usize {
    let r = start_discrepancy(prior, &chain.pi);
    let f2 = f_sup * f_sup;
    let a = 2.0 * f2 / chain.gap_signed;
    let b = 4.0 * r.sqrt() * f2 * (1.0 - chain.gap).powi(burn_in as i32) / (chain.gap * chain.gap);
    let e2 = eps * eps;
    let root = (a + (a * a + 4.0 * e2 * b).sqrt()) / (2.0 * e2);
    let mut n = root.ceil().max(1.0) as usize;
    while n > 1 && rudolf_bound(f_sup, chain, prior, n - 1, burn_in) <= e2 {
        n -= 1;
    }
    while rudolf_bound(f_sup, chain, prior, n, burn_in) > e2 {
        n += 1;
    }
    n
}
