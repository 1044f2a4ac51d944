use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::linalg::{C64, ZERO};
use crate::markov::{ProposalKernel, StateSpace};

/// Registers `R_S (x) R_M (x) R_C`, flattened as `((s * moves) + m) * 2 + c`.
///
/// `R_M` holds the move alphabet with the zero move pinned to index 0, so
/// `|0>_{R_M}` is the register's reference state whether or not the
/// proposal gives the zero move any weight.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterLayout {
    space: StateSpace,
    moves: Vec<Vec<i64>>,
    weights: Vec<f64>,
    negation: Vec<usize>,
    /// `targets[s * moves + m]` is the state reached from `s` by move `m`.
    targets: Vec<usize>,
}

impl RegisterLayout {
    pub fn new(space: &StateSpace, kernel: &ProposalKernel) -> Result<Self> {
        if kernel.len() != space.len() {
            return Err(CoreError::Invalid("proposal and state space sizes differ".into()));
        }
        let d = space.dimension();
        let zero = vec![0i64; d];
        let mut moves = vec![zero.clone()];
        let mut weights = vec![0.0];
        for m in kernel.moves() {
            if m.delta == zero {
                weights[0] = m.prob;
            } else {
                moves.push(m.delta.clone());
                weights.push(m.prob);
            }
        }
        let negation = moves
            .iter()
            .map(|m| {
                let neg: Vec<i64> = m.iter().map(|v| -v).collect();
                moves.iter().position(|e| *e == neg)
            })
            .collect::<Option<Vec<usize>>>()
            .ok_or_else(|| CoreError::Invalid("move alphabet is not closed under negation".into()))?;
        let mut targets = Vec::with_capacity(space.len() * moves.len());
        for s in 0..space.len() {
            for m in &moves {
                targets.push(space.shift(s, m));
            }
        }
        Ok(Self { space: space.clone(), moves, weights, negation, targets })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    pub fn n_moves(&self) -> usize {
        self.moves.len()
    }

    pub fn dim(&self) -> usize {
        self.n_states() * self.n_moves() * 2
    }

    pub fn moves(&self) -> &[Vec<i64>] {
        &self.moves
    }

    /// Proposal weight of each move; the zero move may carry weight zero.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn negation(&self, m: usize) -> usize {
        self.negation[m]
    }

    pub fn target(&self, s: usize, m: usize) -> usize {
        self.targets[s * self.n_moves() + m]
    }

    pub fn index(&self, s: usize, m: usize, c: usize) -> usize {
        (s * self.n_moves() + m) * 2 + c
    }

    pub fn decompose(&self, idx: usize) -> (usize, usize, usize) {
        let c = idx % 2;
        let sm = idx / 2;
        (sm / self.n_moves(), sm % self.n_moves(), c)
    }

    /// Index of `|x>|0>|0>`.
    pub fn reference(&self, s: usize) -> usize {
        self.index(s, 0, 0)
    }
}

/// Complex amplitudes over a register layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amps: DVector<C64>,
}

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        Self { amps: DVector::from_element(dim, ZERO) }
    }

    pub fn basis(dim: usize, idx: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.amps[idx] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_amplitudes(amps: DVector<C64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Global-phase-invariant distance `sqrt(2 - 2 |<a|b>|)` between unit vectors.
    pub fn distance(&self, other: &StateVector) -> f64 {
        (2.0 - 2.0 * self.inner(other).norm()).max(0.0).sqrt()
    }

    /// Probability of each `R_S` value when the other registers are traced out.
    pub fn marginal(&self, layout: &RegisterLayout) -> Vec<f64> {
        let mut p = vec![0.0; layout.n_states()];
        for (i, a) in self.amps.iter().enumerate() {
            p[layout.decompose(i).0] += a.norm_sqr();
        }
        p
    }
}

/// `|P> = sum_x sqrt(P(x)) |x>|0>|0>`.
pub fn encode_distribution(p: &[f64], layout: &RegisterLayout) -> Result<StateVector> {
    if p.len() != layout.n_states() {
        return Err(CoreError::Invalid(format!(
            "distribution has {} entries, layout has {} states",
            p.len(),
            layout.n_states()
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 || p.iter().any(|&v| v < 0.0) {
        return Err(CoreError::Invalid(format!("distribution sums to {total}")));
    }
    let mut v = StateVector::zeros(layout.dim());
    for (x, &px) in p.iter().enumerate() {
        v.amps[layout.reference(x)] = C64::new(px.sqrt(), 0.0);
    }
    Ok(v)
}
