use serde::Serialize;

use super::chain::{tv_distance, ChainModel};
use crate::linalg::RMatrix;

/// Exact worst-case distance to stationarity after `n` steps and the spectral bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingPoint {
    pub n: usize,
    pub exact: f64,
    pub bound: f64,
}

impl MixingPoint {
    pub fn holds(&self) -> bool {
        self.exact <= self.bound + 1e-12
    }
}

/// `(1 - Delta)^n / (2 sqrt(Pi_min))`.
pub fn mixing_bound(chain: &ChainModel, n: usize) -> f64 {
    (1.0 - chain.gap).powi(n as i32) / (2.0 * chain.pi_min().sqrt())
}

/// `d(n) = max_x |e_x W^n - Pi|_TV`; the supremum over initial laws is
/// attained at a point mass because TV is convex.
fn worst_case_distance(wn: &RMatrix, pi: &[f64]) -> f64 {
    (0..wn.nrows())
        .map(|x| {
            let row: Vec<f64> = wn.row(x).iter().cloned().collect();
            tv_distance(&row, pi)
        })
        .fold(0.0, f64::max)
}

pub fn mixing_bound_check(chain: &ChainModel, n: usize) -> MixingPoint {
    let wn = chain.w.pow(n as u32);
    MixingPoint { n, exact: worst_case_distance(&wn, &chain.pi), bound: mixing_bound(chain, n) }
}

/// `d(n)` and the bound for every `n` in `0..=n_max`, reusing matrix powers.
pub fn mixing_profile(chain: &ChainModel, n_max: usize) -> Vec<MixingPoint> {
    let k = chain.len();
    let mut wn = RMatrix::identity(k, k);
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        out.push(MixingPoint { n, exact: worst_case_distance(&wn, &chain.pi), bound: mixing_bound(chain, n) });
        wn = &wn * &chain.w;
    }
    out
}

/// Smallest `n` with `d(n) <= eps`, searched up to `n_max`.
pub fn mixing_time(chain: &ChainModel, eps: f64, n_max: usize) -> Option<usize> {
    mixing_profile(chain, n_max).into_iter().find(|p| p.exact <= eps).map(|p| p.n)
}

/// `log(1 / (eps Pi_min)) / Delta`.
pub fn mixing_time_bound(chain: &ChainModel, eps: f64) -> f64 {
    (1.0 / (eps * chain.pi_min())).ln() / chain.gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_state_closed_form() {
        let (a, b) = (0.25, 0.25);
        let w = RMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]);
        let c = ChainModel::from_matrix(w).unwrap();
        let p = mixing_bound_check(&c, 10);
        // Starting from a point mass the deviation is pi_other * |1 - a - b|^n.
        let exact = 0.5 * (1.0f64 - a - b).powi(10);
        assert_abs_diff_eq!(p.exact, exact, epsilon = 1e-14);
        assert_abs_diff_eq!(p.bound, 0.5f64.powi(10) / (2.0 * 0.5f64.sqrt()), epsilon = 1e-14);
        assert!(p.holds());
    }

    #[test]
    fn profile_matches_pointwise() {
        let w = RMatrix::from_row_slice(3, 3, &[0.5, 0.3, 0.2, 0.3, 0.4, 0.3, 0.2, 0.3, 0.5]);
        let c = ChainModel::from_matrix(w).unwrap();
        let prof = mixing_profile(&c, 12);
        assert!(prof[0].exact <= 1.0);
        for n in [0, 1, 5, 12] {
            assert_abs_diff_eq!(prof[n].exact, mixing_bound_check(&c, n).exact, epsilon = 1e-13);
        }
        assert!(prof.iter().all(MixingPoint::holds));
        let t = mixing_time(&c, 0.01, 200).unwrap();
        assert!((t as f64) <= mixing_time_bound(&c, 0.01));
    }
}
