use serde::Serialize;

use super::mean::{estimate, QmciMode, QmciResult};
use super::oracle::LikelihoodOracle;
use crate::error::{CoreError, Result};
use crate::linalg::{spectral_norm_c, RMatrix};
use crate::markov::{acceptance_table, ProposalKernel, TargetModel};
use crate::qsim::{build_walk_operator, AcceptanceSource, RegisterLayout, WalkOperator};

/// Acceptance table built from QMCI estimates of `L_sum`.
#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceApprox {
    /// `L~(x) = max(0, L~_sum(x) + l0(x) + C)`.
    pub l_tilde: Vec<f64>,
    pub estimates: Vec<QmciResult>,
    #[serde(skip)]
    pub target: TargetModel,
    #[serde(skip)]
    pub table: RMatrix,
    /// `max |A~ - A|` over proposal-supported pairs.
    pub max_error: f64,
    pub max_likelihood_error: f64,
    /// Queries per `(x, x + dx)` entry: two estimates, each computed and uncomputed.
    pub per_entry_charge: u64,
    pub pairs: usize,
    pub total_charge: u64,
}

/// QMCI residual budget inside `B~~_{delta}`: `delta^2 / 16`.
pub fn entry_delta(delta: f64) -> f64 {
    delta * delta / 16.0
}

/// Builds `A~` from one `L~` shared by every pair, as a single `B~~` realizes.
pub fn approx_acceptance_table(
    oracle: &LikelihoodOracle,
    model: &TargetModel,
    t: &ProposalKernel,
    eps: f64,
    delta: f64,
    mode: QmciMode,
    seed: u64,
) -> Result<AcceptanceApprox> {
    let n = oracle.n_states();
    if model.len() != n || t.len() != n {
        return Err(CoreError::Invalid("oracle, model and proposal sizes differ".into()));
    }
    let exact = oracle.likelihoods();
    let mismatch = exact.iter().zip(model.neg_log_lik()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if mismatch > 1e-9 * (1.0 + exact.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
        return Err(CoreError::Invalid(format!("model likelihood differs from the oracle by {mismatch}")));
    }
    let d = entry_delta(delta);
    let estimates = (0..n).map(|x| estimate(oracle, x, eps, d, mode, seed)).collect::<Result<Vec<_>>>()?;
    let l_tilde: Vec<f64> = estimates
        .iter()
        .enumerate()
        .map(|(x, r)| (r.estimate + oracle.l0()[x] + oracle.constant()).max(0.0))
        .collect();
    let target = model.with_likelihood(l_tilde.clone())?;
    let table = acceptance_table(&target, t);
    let a = acceptance_table(model, t);
    let max_error = (&a - &table).amax();
    let max_likelihood_error = exact.iter().zip(&l_tilde).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pairs = t.matrix().iter().filter(|&&p| p > 0.0).count();
    let per_entry_charge = estimates.first().map_or(0, |r| r.queries).saturating_mul(4);
    let total_charge = per_entry_charge.saturating_mul(pairs as u64);
    oracle.charge(total_charge);
    Ok(AcceptanceApprox {
        l_tilde,
        estimates,
        target,
        table,
        max_error,
        max_likelihood_error,
        per_entry_charge,
        pairs,
        total_charge,
    })
}

#[derive(Debug, Clone)]
pub struct ApproxWalk {
    pub walk: WalkOperator,
    pub approx: AcceptanceApprox,
    /// Bound on the residual branch of one application: analytic `delta`
    /// in emulated mode, assembled from the realized QMCI residuals in
    /// faithful mode.
    pub residual: f64,
    /// Queries per application: `B~~` and its inverse.
    pub charge: u64,
}

/// `U~~ = R V^dagger B~~^dagger S F B~~ V` with `B~~` at `delta / 2`, acting as the
/// exact walk operator of `C_{L~}` on the residual-free branch.
#[allow(clippy::too_many_arguments)]
pub fn approx_walk_operator(
    oracle: &LikelihoodOracle,
    model: &TargetModel,
    t: &ProposalKernel,
    layout: &RegisterLayout,
    delta: f64,
    eps: f64,
    mode: QmciMode,
    seed: u64,
) -> Result<ApproxWalk> {
    let approx = approx_acceptance_table(oracle, model, t, eps, delta / 2.0, mode, seed)?;
    let walk = build_walk_operator(layout, t, AcceptanceSource::Exact(&approx.target))?;
    let residual = match mode {
        QmciMode::Emulated => delta,
        QmciMode::Faithful => {
            let n = oracle.n_states();
            let mut worst = 0.0f64;
            for x in 0..n {
                for y in 0..n {
                    if t.prob(x, y) > 0.0 {
                        let g = 2.0 * (approx.estimates[x].residual() + approx.estimates[y].residual());
                        worst = worst.max(g);
                    }
                }
            }
            2.0 * worst
        }
    };
    let charge = approx.per_entry_charge.saturating_mul(2);
    Ok(ApproxWalk { walk, approx, residual, charge })
}

/// `|U~~ - U|_2` on the full register space.
pub fn walk_difference(a: &WalkOperator, b: &WalkOperator) -> f64 {
    spectral_norm_c(&(&a.u - &b.u))
}
