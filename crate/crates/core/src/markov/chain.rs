use std::collections::VecDeque;

use super::proposal::ProposalKernel;
use super::target::TargetModel;
use crate::error::{CoreError, Result};
use crate::linalg::{condition_number, symmetric_eigen, RMatrix};

/// Absolute tolerance for probability-level comparisons.
pub const PROB_TOL: f64 = 1e-10;

/// MH acceptance `min{1, P(y)T(y,x) / (P(x)T(x,y))}` from the unnormalized target.
pub fn acceptance_ratio(model: &TargetModel, t: &ProposalKernel, x: usize, y: usize) -> Result<f64> {
    let txy = t.prob(x, y);
    if txy <= 0.0 {
        return Err(CoreError::ZeroProposal { x, y });
    }
    let log_ratio = model.log_unnormalized(y) - model.log_unnormalized(x) + (t.prob(y, x) / txy).ln();
    Ok(if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() })
}

/// Acceptance values on the support of `T`, zero elsewhere.
pub fn acceptance_table(model: &TargetModel, t: &ProposalKernel) -> RMatrix {
    let n = t.len();
    RMatrix::from_fn(n, n, |x, y| {
        if t.prob(x, y) > 0.0 {
            acceptance_ratio(model, t, x, y).unwrap_or(0.0)
        } else {
            0.0
        }
    })
}

/// `W(x,y) = T(x,y)A(x,y)` off the diagonal, rows completed to one.
pub fn transition_from_acceptance(t: &ProposalKernel, a: &RMatrix) -> Result<RMatrix> {
    let n = t.len();
    let mut w = RMatrix::zeros(n, n);
    for x in 0..n {
        let mut off = 0.0;
        for y in 0..n {
            if y == x {
                continue;
            }
            let v = a[(x, y)];
            if !(0.0..=1.0).contains(&v) {
                return Err(CoreError::AcceptanceOutOfRange { value: v });
            }
            w[(x, y)] = t.prob(x, y) * v;
            off += w[(x, y)];
        }
        w[(x, x)] = 1.0 - off;
    }
    Ok(w)
}

/// A reversible finite Markov chain with its spectral data.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub w: RMatrix,
    pub pi: Vec<f64>,
    /// Eigenvalues sorted by descending modulus; the unit eigenvalue first.
    pub eigenvalues: Vec<f64>,
    /// `1 - |lambda_1|`.
    pub gap: f64,
    /// `1 - lambda_1'` with `lambda_1'` the largest non-unit eigenvalue.
    pub gap_signed: f64,
    /// Condition number of `Q = D_P^{-1} O`.
    pub kappa: f64,
    /// Orthonormal eigenbasis `O` of `D_P W D_P^{-1}`, columns ordered like `eigenvalues`.
    pub eigenvectors: RMatrix,
    pub detailed_balance_residual: f64,
}

impl ChainModel {
    /// Chain from an explicit transition matrix; `pi` is recovered as the
    /// left unit eigenvector and detailed balance is required.
    pub fn from_matrix(w: RMatrix) -> Result<Self> {
        let pi = stationary_distribution(&w)?;
        Self::from_parts(w, pi)
    }

    /// Chain from `W` and a candidate stationary distribution.
    pub fn from_parts(w: RMatrix, pi: Vec<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n || pi.len() != n || n == 0 {
            return Err(CoreError::Invalid("transition matrix must be square and match pi".into()));
        }
        for x in 0..n {
            let s: f64 = w.row(x).sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(CoreError::Invalid(format!("row {x} of W sums to {s}")));
            }
            if w.row(x).iter().any(|&v| v < -1e-14) {
                return Err(CoreError::Invalid(format!("row {x} of W has a negative entry")));
            }
        }
        let classes = communicating_classes(&w);
        if classes > 1 {
            return Err(CoreError::Reducible { classes });
        }
        let mut residual: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                residual = residual.max((pi[x] * w[(x, y)] - pi[y] * w[(y, x)]).abs());
            }
        }
        if residual > PROB_TOL {
            return Err(CoreError::NonReversible { residual });
        }
        let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
        let sym = RMatrix::from_fn(n, n, |x, y| {
            if y == x {
                w[(x, x)]
            } else {
                (w[(x, y)] * w[(y, x)]).sqrt()
            }
        });
        let (vals, vecs) = symmetric_eigen(&sym);
        let unit = (0..n)
            .min_by(|&a, &b| (vals[a] - 1.0).abs().total_cmp(&(vals[b] - 1.0).abs()))
            .unwrap();
        let mut rest: Vec<usize> = (0..n).filter(|&i| i != unit).collect();
        rest.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()));
        let order: Vec<usize> = std::iter::once(unit).chain(rest.iter().cloned()).collect();
        let eigenvalues: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let mut eigenvectors = RMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = vecs.column(src).into_owned();
            let lead = col.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            if lead < 0.0 {
                col = -col;
            }
            eigenvectors.set_column(dst, &col);
        }
        let (gap, gap_signed) = if n == 1 {
            (1.0, 1.0)
        } else {
            let l1 = eigenvalues[1].abs();
            let l1s = rest.iter().map(|&i| vals[i]).fold(f64::NEG_INFINITY, f64::max);
            (1.0 - l1, 1.0 - l1s)
        };
        let q = RMatrix::from_fn(n, n, |x, j| eigenvectors[(x, j)] / sqrt_pi[x]);
        let kappa = condition_number(&q);
        Ok(Self { w, pi, eigenvalues, gap, gap_signed, kappa, eigenvectors, detailed_balance_residual: residual })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn pi_min(&self) -> f64 {
        self.pi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `D_P W D_P^{-1}` with `D_P = diag(sqrt(pi))`.
    pub fn symmetrized(&self) -> RMatrix {
        let n = self.len();
        RMatrix::from_fn(n, n, |x, y| (self.pi[x] / self.pi[y]).sqrt() * self.w[(x, y)])
    }

    /// Residual `max_y |(pi W)_y - pi_y|`.
    pub fn stationarity_residual(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|y| ((0..n).map(|x| self.pi[x] * self.w[(x, y)]).sum::<f64>() - self.pi[y]).abs())
            .fold(0.0, f64::max)
    }
}

/// Transition matrix of the MH chain together with its spectral data.
pub fn build_transition_matrix(model: &TargetModel, t: &ProposalKernel) -> Result<ChainModel> {
    if model.len() != t.len() {
        return Err(CoreError::Invalid(format!(
            "model has {} states, proposal has {}",
            model.len(),
            t.len()
        )));
    }
    let a = acceptance_table(model, t);
    let w = transition_from_acceptance(t, &a)?;
    let chain = ChainModel::from_parts(w, model.distribution())?;
    if chain.stationarity_residual() > PROB_TOL {
        return Err(CoreError::Numerical(format!(
            "pi W differs from pi by {}",
            chain.stationarity_residual()
        )));
    }
    Ok(chain)
}

/// `Delta = 1 - |lambda_1|`; a vanishing gap is reported as an error.
pub fn spectral_gap(chain: &ChainModel) -> Result<f64> {
    if chain.gap <= 1e-12 {
        return Err(CoreError::ZeroGap { modulus: 1.0 - chain.gap });
    }
    Ok(chain.gap)
}

/// `max_A |P(A) - Q(A)| = (1/2) |P - Q|_1`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must share a support");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Left unit eigenvector of `W`, normalized to a probability vector.
pub fn stationary_distribution(w: &RMatrix) -> Result<Vec<f64>> {
    let n = w.nrows();
    let mut a = w.transpose() - RMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or(CoreError::Reducible { classes: communicating_classes(w).max(2) })?;
    Ok(sol.iter().cloned().collect())
}

/// Number of strongly connected components of the support graph of `W`.
pub fn communicating_classes(w: &RMatrix) -> usize {
    let n = w.nrows();
    let reach = |from: usize, forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let e = if forward { w[(u, v)] } else { w[(v, u)] };
                if e > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    };
    let mut assigned = vec![false; n];
    let mut classes = 0;
    for s in 0..n {
        if assigned[s] {
            continue;
        }
        let f = reach(s, true);
        let b = reach(s, false);
        for v in 0..n {
            if f[v] && b[v] {
                assigned[v] = true;
            }
        }
        classes += 1;
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::space::StateSpace;
    use approx::assert_abs_diff_eq;

    fn two_state(a: f64, b: f64) -> RMatrix {
        RMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b])
    }

    #[test]
    fn acceptance_two_state_example() {
        let s = StateSpace::ring(2).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.5).unwrap();
        let m = TargetModel::from_distribution(&[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert_abs_diff_eq!(acceptance_ratio(&m, &t, 0, 1).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(acceptance_ratio(&m, &t, 1, 0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn acceptance_rejects_zero_proposal() {
        let s = StateSpace::ring(4).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.0).unwrap();
        let m = TargetModel::with_uniform_prior(vec![0.0; 4]).unwrap();
        assert_eq!(acceptance_ratio(&m, &t, 0, 2), Err(CoreError::ZeroProposal { x: 0, y: 2 }));
    }

    #[test]
    fn two_state_gaps() {
        let c = ChainModel::from_matrix(two_state(0.25, 0.25)).unwrap();
        assert_abs_diff_eq!(c.gap, 0.5, epsilon = 1e-12);
        let c = ChainModel::from_matrix(two_state(0.5, 0.5)).unwrap();
        assert_abs_diff_eq!(c.gap, 1.0, epsilon = 1e-12);
        let c = ChainModel::from_matrix(two_state(0.2, 0.6)).unwrap();
        assert_abs_diff_eq!(c.eigenvalues[1], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(c.pi[0], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn identity_chain_is_reducible() {
        assert_eq!(
            ChainModel::from_matrix(RMatrix::identity(3, 3)).unwrap_err(),
            CoreError::Reducible { classes: 3 }
        );
    }

    #[test]
    fn periodic_chain_has_zero_gap() {
        let c = ChainModel::from_matrix(two_state(1.0, 1.0)).unwrap();
        assert!(matches!(spectral_gap(&c), Err(CoreError::ZeroGap { .. })));
    }

    #[test]
    fn cyclic_chain_is_not_reversible() {
        let w = RMatrix::from_row_slice(3, 3, &[0.2, 0.8, 0.0, 0.0, 0.2, 0.8, 0.8, 0.0, 0.2]);
        assert!(matches!(ChainModel::from_matrix(w), Err(CoreError::NonReversible { .. })));
    }

    #[test]
    fn uniform_symmetric_gives_w_equal_t() {
        let s = StateSpace::ring(5).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.1).unwrap();
        let m = TargetModel::with_uniform_prior(vec![0.3; 5]).unwrap();
        let c = build_transition_matrix(&m, &t).unwrap();
        assert_abs_diff_eq!((&c.w - t.matrix()).norm(), 0.0, epsilon = 1e-15);
        let expected = 1.0 - (0.1 + 0.9 * (2.0 * std::f64::consts::PI / 5.0).cos());
        assert_abs_diff_eq!(c.gap_signed, expected, epsilon = 1e-12);
    }

    #[test]
    fn kappa_closed_form() {
        let s = StateSpace::ring(6).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.3).unwrap();
        let m = TargetModel::with_uniform_prior(vec![0.0, 0.4, 1.3, 0.2, 2.0, 0.7]).unwrap();
        let c = build_transition_matrix(&m, &t).unwrap();
        let pmax = c.pi.iter().cloned().fold(0.0, f64::max);
        assert_abs_diff_eq!(c.kappa, (pmax / c.pi_min()).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn tv_examples() {
        assert_abs_diff_eq!(tv_distance(&[0.7, 0.3], &[0.5, 0.5]), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0, epsilon = 1e-15);
        assert_eq!(tv_distance(&[0.25; 4], &[0.25; 4]), 0.0);
    }
}
