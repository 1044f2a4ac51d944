//! Checks of the acceptance-ratio, spectral-gap and stationary-distribution
//! perturbation bounds for MH chains driven by an approximate likelihood.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::linalg::{condition_number_c, general_eigen, norm_inf, norm_one, spectral_norm, to_complex, C64, RMatrix};
use crate::markov::{acceptance_table, build_transition_matrix, tv_distance, ChainModel, ProposalKernel, TargetModel};

/// Hypothesis `eps <= 1/4` of the acceptance and gap lemmas.
pub const EPS_LIMIT: f64 = 0.25;

/// A likelihood table and a fixed perturbation of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedLikelihood {
    pub base: Vec<f64>,
    pub perturbed: Vec<f64>,
    /// `max_x |L~(x) - L(x)|`.
    pub eps: f64,
    pub profile: Vec<f64>,
}

impl PerturbedLikelihood {
    /// Wraps an explicit pair of tables.
    pub fn from_tables(base: Vec<f64>, perturbed: Vec<f64>) -> Result<Self> {
        if base.len() != perturbed.len() {
            return Err(CoreError::Invalid("likelihood tables differ in length".into()));
        }
        if perturbed.iter().any(|&v| !(v >= 0.0)) {
            return Err(CoreError::Invalid("perturbed likelihood must be nonnegative".into()));
        }
        let eps = base.iter().zip(&perturbed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let profile = vec![0.0; base.len()];
        Ok(Self { base, perturbed, eps, profile })
    }
}

/// `L~(x) = max(0, L(x) + eps_target * eta(x))`, `eta(x) ~ U[-1, 1]` drawn once per state.
pub fn perturb_likelihood(l: &[f64], eps_target: f64, seed: u64) -> PerturbedLikelihood {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile: Vec<f64> = l.iter().map(|_| rng.random_range(-1.0..=1.0)).collect();
    perturb_with_profile(l, eps_target, profile)
}

pub fn perturb_with_profile(l: &[f64], eps_target: f64, profile: Vec<f64>) -> PerturbedLikelihood {
    let perturbed: Vec<f64> = l.iter().zip(&profile).map(|(v, e)| (v + eps_target * e).max(0.0)).collect();
    let eps = l.iter().zip(&perturbed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    PerturbedLikelihood { base: l.to_vec(), perturbed, eps, profile }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceErrorReport {
    pub eps: f64,
    pub max_diff: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Exhaustive `max_{x,y} |A~(x,y) - A(x,y)|` against `8 eps`.
pub fn acceptance_error_check(
    model: &TargetModel,
    t: &ProposalKernel,
    pert: &PerturbedLikelihood,
) -> Result<AcceptanceErrorReport> {
    if pert.eps > EPS_LIMIT {
        return Err(CoreError::EpsilonTooLarge { eps: pert.eps });
    }
    let a = acceptance_table(model, t);
    let a_tilde = acceptance_table(&model.with_likelihood(pert.perturbed.clone())?, t);
    let max_diff = (&a - &a_tilde).amax();
    let bound = 8.0 * pert.eps;
    Ok(AcceptanceErrorReport { eps: pert.eps, max_diff, bound, pass: max_diff <= bound + 1e-12 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPerturbationReport {
    pub eps: f64,
    pub gap: f64,
    pub gap_perturbed: f64,
    pub kappa: f64,
    pub bound: f64,
    /// `|dW|_2` by SVD.
    pub delta_w_spectral: f64,
    /// `sqrt(|dW|_1 |dW|_inf)`, the looser route through the induced norms.
    pub delta_w_induced: f64,
    /// `16 eps max_y sum_{x != y} T(x,y)`.
    pub norm_one_bound_offdiag: f64,
    /// `16 eps max_y sum_x T(x,y)`.
    pub norm_one_bound_full: f64,
    /// Whether `|dW|_1` already exceeds the off-diagonal form, so only the
    /// form with the diagonal term holds.
    pub full_form_active: bool,
    pub pass: bool,
}

/// `Delta~ >= Delta - 16 (max_y sum_{x != y} T(x,y))^{1/2} kappa eps`.
pub fn spectral_gap_perturbation_check(
    chain: &ChainModel,
    chain_pert: &ChainModel,
    t: &ProposalKernel,
    eps: f64,
) -> Result<GapPerturbationReport> {
    if eps > EPS_LIMIT {
        return Err(CoreError::EpsilonTooLarge { eps });
    }
    let col = t.max_offdiag_column_sum();
    let bound = chain.gap - 16.0 * col.sqrt() * chain.kappa * eps;
    let dw: RMatrix = &chain_pert.w - &chain.w;
    let n1 = norm_one(&dw);
    let offdiag = 16.0 * eps * col;
    Ok(GapPerturbationReport {
        eps,
        gap: chain.gap,
        gap_perturbed: chain_pert.gap,
        kappa: chain.kappa,
        bound,
        delta_w_spectral: spectral_norm(&dw),
        delta_w_induced: (n1 * norm_inf(&dw)).sqrt(),
        norm_one_bound_offdiag: offdiag,
        norm_one_bound_full: 16.0 * eps * t.max_column_sum(),
        full_form_active: n1 > offdiag + 1e-12,
        pass: chain_pert.gap >= bound - 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BauerFikeReport {
    /// Largest distance in a greedy one-to-one matching of the two spectra.
    pub matched_displacement: f64,
    /// `max_lambda min_lambda~ |lambda - lambda~|`.
    pub max_displacement: f64,
    /// `max_lambda~ min_lambda |lambda - lambda~|`, the classical direction.
    pub reverse_displacement: f64,
    pub kappa: f64,
    pub perturbation_norm: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Eigenvalue displacement against `kappa(Q) |B - B~|_2`, with `Q` the
/// eigenvector matrix of `B`.
pub fn bauer_fike_check(b: &RMatrix, b_tilde: &RMatrix) -> Result<BauerFikeReport> {
    if b.shape() != b_tilde.shape() || b.nrows() != b.ncols() {
        return Err(CoreError::Invalid("Bauer-Fike check needs square matrices of equal size".into()));
    }
    let (vals, q) = general_eigen(&to_complex(b))?;
    let kappa = condition_number_c(&q);
    if !(kappa <= 1e12) {
        return Err(CoreError::Defective { cond: kappa });
    }
    let (vals_t, _) = general_eigen(&to_complex(b_tilde))?;
    let dist = |a: &[C64], b: &[C64]| {
        a.iter().map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    let perturbation_norm = spectral_norm(&(b - b_tilde));
    let bound = kappa * perturbation_norm;
    let max_displacement = dist(&vals, &vals_t);
    let reverse_displacement = dist(&vals_t, &vals);
    Ok(BauerFikeReport {
        matched_displacement: greedy_matching(&vals, &vals_t),
        max_displacement,
        reverse_displacement,
        kappa,
        perturbation_norm,
        bound,
        pass: max_displacement.max(reverse_displacement) <= bound * (1.0 + 1e-9) + 1e-12,
    })
}

/// Repeatedly pairs the closest remaining eigenvalues; returns the largest paired distance.
fn greedy_matching(a: &[C64], b: &[C64]) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut used_a, mut used_b) = (vec![false; a.len()], vec![false; b.len()]);
    let mut worst: f64 = 0.0;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

/// `8 eps (ceil(log(2 sqrt(P_min)) / log(1 - Delta)) + 1/Delta)`.
///
/// The ceiling term is floored at zero; it is only negative when
/// `2 sqrt(P_min) > 1`, where dropping it loosens the bound.
pub fn tv_perturbation_bound(chain: &ChainModel, eps: f64) -> Result<f64> {
    if chain.gap <= 0.0 {
        return Err(CoreError::ZeroGap { modulus: 1.0 });
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let lambda = if chain.gap >= 1.0 {
        0.0
    } else {
        ((2.0 * chain.pi_min().sqrt()).ln() / (1.0 - chain.gap).ln()).ceil().max(0.0)
    };
    Ok(8.0 * eps * (lambda + 1.0 / chain.gap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvPerturbationReport {
    pub eps: f64,
    pub tv: f64,
    pub bound: f64,
    /// `eps > 1/4`, where the bound exceeds one.
    pub trivial_branch: bool,
    pub pass: bool,
}

/// Exact `|P~ - P|_TV` from the two normalized targets against the bound.
pub fn tv_perturbation_check(model: &TargetModel, chain: &ChainModel, pert: &PerturbedLikelihood) -> Result<TvPerturbationReport> {
    let p = model.distribution();
    let p_tilde = model.with_likelihood(pert.perturbed.clone())?.distribution();
    let tv = tv_distance(&p, &p_tilde);
    let bound = tv_perturbation_bound(chain, pert.eps)?;
    Ok(TvPerturbationReport { eps: pert.eps, tv, bound, trivial_branch: pert.eps > EPS_LIMIT, pass: tv <= bound + 1e-12 })
}

/// All three checks on one perturbed instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub acceptance: AcceptanceErrorReport,
    pub gap: GapPerturbationReport,
    pub tv: TvPerturbationReport,
}

impl PerturbationReport {
    pub fn pass(&self) -> bool {
        self.acceptance.pass && self.gap.pass && self.tv.pass
    }
}

pub fn perturbation_suite(model: &TargetModel, t: &ProposalKernel, pert: &PerturbedLikelihood) -> Result<PerturbationReport> {
    let chain = build_transition_matrix(model, t)?;
    let chain_pert = build_transition_matrix(&model.with_likelihood(pert.perturbed.clone())?, t)?;
    Ok(PerturbationReport {
        acceptance: acceptance_error_check(model, t, pert)?,
        gap: spectral_gap_perturbation_check(&chain, &chain_pert, t, pert.eps)?,
        tv: tv_perturbation_check(model, &chain, pert)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::StateSpace;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_target_is_identity() {
        let l = vec![0.3, 1.2, 0.0];
        let p = perturb_likelihood(&l, 0.0, 4);
        assert_eq!(p.perturbed, l);
        assert_eq!(p.eps, 0.0);
        assert_eq!(perturb_likelihood(&l, 0.1, 4), perturb_likelihood(&l, 0.1, 4));
    }

    #[test]
    fn clipping_reduces_reported_eps() {
        let p = perturb_with_profile(&[0.05], 0.1, vec![-1.0]);
        assert_eq!(p.perturbed, vec![0.0]);
        assert_abs_diff_eq!(p.eps, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn high_ratio_pair_keeps_unit_acceptance() {
        let s = StateSpace::ring(2).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.5).unwrap();
        // p(1)/p(0) = e^2 > 2, so A(0,1) = 1 before and after a 0.2 shift.
        let m = TargetModel::with_uniform_prior(vec![2.0, 0.0]).unwrap();
        let pert = perturb_with_profile(m.neg_log_lik(), 0.2, vec![-1.0, 1.0]);
        let a = acceptance_table(&m.with_likelihood(pert.perturbed.clone()).unwrap(), &t);
        assert_eq!(a[(0, 1)], 1.0);
        assert!(acceptance_error_check(&m, &t, &pert).unwrap().pass);
    }

    #[test]
    fn rejects_large_eps() {
        let s = StateSpace::ring(3).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.5).unwrap();
        let m = TargetModel::with_uniform_prior(vec![1.0, 1.0, 1.0]).unwrap();
        let pert = perturb_with_profile(m.neg_log_lik(), 0.5, vec![1.0, 0.0, 0.0]);
        assert_eq!(acceptance_error_check(&m, &t, &pert), Err(CoreError::EpsilonTooLarge { eps: 0.5 }));
        let r = perturbation_suite(&m, &t, &perturb_with_profile(m.neg_log_lik(), 0.2, vec![1.0, 0.0, -1.0])).unwrap();
        assert!(r.pass());
    }

    #[test]
    fn trivial_branch_bound_exceeds_one() {
        let w = RMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]);
        let c = ChainModel::from_matrix(w).unwrap();
        assert!(tv_perturbation_bound(&c, 0.26).unwrap() > 1.0);
        assert_eq!(tv_perturbation_bound(&c, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_state_gap_bound_closed_form() {
        // L = (0, ln 2) gives P = (2/3, 1/3).
        let s = StateSpace::ring(2).unwrap();
        let t = ProposalKernel::nearest_neighbor(&s, 0.5).unwrap();
        let m = TargetModel::with_uniform_prior(vec![0.0, 2f64.ln()]).unwrap();
        let pert = PerturbedLikelihood::from_tables(m.neg_log_lik().to_vec(), vec![0.0, 2f64.ln() + 0.1]).unwrap();
        let r = perturbation_suite(&m, &t, &pert).unwrap();
        // W = [[1 - a, a], [b, 1 - b]] with a = 0.5 * 0.5, b = 0.5; gap = a + b.
        assert_abs_diff_eq!(r.gap.gap, 0.75, epsilon = 1e-12);
        let a_t = 0.5 * (-0.1f64).exp() * 0.5;
        assert_abs_diff_eq!(r.gap.gap_perturbed, a_t + 0.5, epsilon = 1e-12);
        let kappa = (2.0f64).sqrt();
        assert_abs_diff_eq!(r.gap.bound, 0.75 - 16.0 * 0.5f64.sqrt() * kappa * 0.1, epsilon = 1e-9);
        assert!(r.pass() && r.gap.gap_perturbed > r.gap.bound);
    }

    #[test]
    fn bauer_fike_diagonal_case() {
        let b = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.5, -0.2]));
        let bt = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.01, 0.47, -0.2]));
        let r = bauer_fike_check(&b, &bt).unwrap();
        assert_abs_diff_eq!(r.kappa, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matched_displacement, 0.03, epsilon = 1e-12);
        assert!(r.pass);
        assert_eq!(bauer_fike_check(&b, &b).unwrap().max_displacement, 0.0);
    }

    #[test]
    fn bauer_fike_rejects_jordan_block() {
        let b = RMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(bauer_fike_check(&b, &b), Err(CoreError::Defective { .. })));
    }
}
