use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::proposal::ProposalKernel;
use super::space::StateSpace;
use super::target::TargetModel;

/// A randomly drawn MH problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: StateSpace,
    pub kernel: ProposalKernel,
    pub model: TargetModel,
}

/// Draws a ring or small 2-D torus with `min_states..=max_states` points,
/// a nearest-neighbour or Gaussian proposal, a random prior and
/// `L(x) ~ U[0, l_scale]`.
pub fn random_instance(seed: u64, min_states: usize, max_states: usize, l_scale: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(min_states.max(2)..=max_states.max(2));
    let shape = match (2..n).rev().find(|d| n % d == 0 && d * d <= n) {
        Some(d) if d > 1 && rng.random_bool(0.4) => vec![d, n / d],
        _ => vec![n],
    };
    let lo = vec![0.0; shape.len()];
    let hi: Vec<f64> = shape.iter().map(|&k| (k - 1).max(1) as f64).collect();
    let space = StateSpace::uniform(&shape, &lo, &hi).expect("shape is nonempty");
    let kernel = if rng.random_bool(0.7) {
        ProposalKernel::nearest_neighbor(&space, rng.random_range(0.05..0.5))
    } else {
        ProposalKernel::gaussian(&space, 1, rng.random_range(0.6..1.5))
    }
    .expect("valid proposal parameters");
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let prior: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let l: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..l_scale)).collect();
    let model = TargetModel::new(prior, l).expect("positive prior, nonnegative L");
    Instance { space, kernel, model }
}

/// Reversible random-walk chain on `0..n` with uniform ring proposal.
pub fn random_ring_model(seed: u64, n: usize, stay: f64, l_scale: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = StateSpace::ring(n).expect("n >= 1");
    let kernel = ProposalKernel::nearest_neighbor(&space, stay).expect("valid stay probability");
    let l: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..l_scale)).collect();
    let model = TargetModel::with_uniform_prior(l).expect("nonnegative L");
    Instance { space, kernel, model }
}
