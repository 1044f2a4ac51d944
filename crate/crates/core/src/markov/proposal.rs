use serde::{Deserialize, Serialize};

use super::space::StateSpace;
use crate::error::{CoreError, Result};
use crate::linalg::RMatrix;

/// One entry of the move alphabet: an integer displacement and its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub delta: Vec<i64>,
    pub prob: f64,
}

/// Translation-invariant proposal on a torus grid.
///
/// `T(x, y)` is the total weight of moves carrying `x` onto `y`; distinct
/// moves may alias onto the same target on short axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalKernel {
    moves: Vec<Move>,
    matrix: RMatrix,
}

impl ProposalKernel {
    /// Validates the alphabet (closed under negation, symmetric weights,
    /// normalized) and tabulates `T`.
    pub fn from_moves(space: &StateSpace, moves: Vec<Move>) -> Result<Self> {
        let d = space.dimension();
        let mut merged: Vec<Move> = Vec::new();
        for m in moves {
            if m.delta.len() != d {
                return Err(CoreError::Invalid(format!(
                    "move {:?} has dimension {}, expected {d}",
                    m.delta,
                    m.delta.len()
                )));
            }
            if !(m.prob.is_finite() && m.prob >= 0.0) {
                return Err(CoreError::Invalid(format!("move {:?} has weight {}", m.delta, m.prob)));
            }
            if m.prob == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|e| e.delta == m.delta) {
                Some(e) => e.prob += m.prob,
                None => merged.push(m),
            }
        }
        let total: f64 = merged.iter().map(|m| m.prob).sum();
        if merged.is_empty() || (total - 1.0).abs() > 1e-12 {
            return Err(CoreError::NonNormalizable { row: 0, sum: total });
        }
        for m in &merged {
            let neg: Vec<i64> = m.delta.iter().map(|v| -v).collect();
            match merged.iter().find(|e| e.delta == neg) {
                Some(e) if (e.prob - m.prob).abs() <= 1e-12 => {}
                Some(_) => {
                    return Err(CoreError::Invalid(format!(
                        "move {:?} and its negation carry different weights",
                        m.delta
                    )))
                }
                None => {
                    return Err(CoreError::Invalid(format!(
                        "move alphabet is not closed under negation: {:?}",
                        m.delta
                    )))
                }
            }
        }
        merged.sort_by(|a, b| a.delta.cmp(&b.delta));
        let n = space.len();
        let mut matrix = RMatrix::zeros(n, n);
        for x in 0..n {
            for m in &merged {
                matrix[(x, space.shift(x, &m.delta))] += m.prob;
            }
        }
        Ok(Self { moves: merged, matrix })
    }

    /// Stays put with probability `stay`; otherwise steps to one of the `2d`
    /// axis neighbours uniformly. Axes of length one are skipped.
    pub fn nearest_neighbor(space: &StateSpace, stay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&stay) {
            return Err(CoreError::Invalid(format!("stay probability {stay} outside [0,1)")));
        }
        let d = space.dimension();
        let active: Vec<usize> = (0..d).filter(|&i| space.axis(i).len() > 1).collect();
        let mut moves = Vec::new();
        if active.is_empty() {
            moves.push(Move { delta: vec![0; d], prob: 1.0 });
            return Self::from_moves(space, moves);
        }
        if stay > 0.0 {
            moves.push(Move { delta: vec![0; d], prob: stay });
        }
        let w = (1.0 - stay) / (2 * active.len()) as f64;
        for &i in &active {
            for s in [-1i64, 1] {
                let mut delta = vec![0; d];
                delta[i] = s;
                moves.push(Move { delta, prob: w });
            }
        }
        Self::from_moves(space, moves)
    }

    /// Discretized isotropic Gaussian over the box `|delta_i| <= radius`,
    /// renormalized over the box.
    pub fn gaussian(space: &StateSpace, radius: usize, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(CoreError::Invalid(format!("Gaussian width {std} must be positive")));
        }
        let d = space.dimension();
        let side = 2 * radius + 1;
        let count = side.pow(d as u32);
        let mut moves: Vec<Move> = (0..count)
            .map(|mut k| {
                let mut delta = vec![0i64; d];
                for slot in delta.iter_mut() {
                    *slot = (k % side) as i64 - radius as i64;
                    k /= side;
                }
                let sq: f64 = delta.iter().map(|&v| (v * v) as f64).sum();
                Move { delta, prob: (-sq / (2.0 * std * std)).exp() }
            })
            .collect();
        let total: f64 = moves.iter().map(|m| m.prob).sum();
        for m in &mut moves {
            m.prob /= total;
        }
        // Pairs +delta/-delta get identical weights; the centre absorbs rounding.
        let residual = 1.0 - moves.iter().map(|m| m.prob).sum::<f64>();
        moves[count / 2].prob += residual;
        Self::from_moves(space, moves)
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.matrix
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// `max_y sum_{x != y} T(x, y)`, the column mass that enters the
    /// spectral-gap perturbation bound.
    pub fn max_offdiag_column_sum(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|y| (0..n).filter(|&x| x != y).map(|x| self.matrix[(x, y)]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max_y sum_x T(x, y)`, the looser form that includes the diagonal.
    pub fn max_column_sum(&self) -> f64 {
        let n = self.len();
        (0..n).map(|y| (0..n).map(|x| self.matrix[(x, y)]).sum::<f64>()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nearest_neighbor_rows_normalized() {
        let s = StateSpace::uniform(&[4, 3], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.2).unwrap();
        for x in 0..s.len() {
            assert_abs_diff_eq!(t.matrix().row(x).sum(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!((t.matrix() - t.matrix().transpose()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_state_aliasing_sums_weights() {
        let s = StateSpace::ring(2).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.75).unwrap();
        assert_abs_diff_eq!(t.prob(0, 1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t.prob(0, 0), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_is_symmetric_and_normalized() {
        let s = StateSpace::uniform(&[6, 5], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let t = ProposalKernel::gaussian(&s, 1, 0.8).unwrap();
        assert_eq!(t.moves().len(), 9);
        for x in 0..s.len() {
            assert_abs_diff_eq!(t.matrix().row(x).sum(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!((t.matrix() - t.matrix().transpose()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_unclosed_alphabet() {
        let s = StateSpace::ring(4).unwrap();
        let moves = vec![Move { delta: vec![1], prob: 0.5 }, Move { delta: vec![0], prob: 0.5 }];
        assert!(ProposalKernel::from_moves(&s, moves).is_err());
    }
}
