use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mean::QmciMode;
use super::oracle::LikelihoodOracle;
use super::walk::{approx_acceptance_table, AcceptanceApprox};
use crate::annealing::{qsa_generate, qsa_schedule, AnnealOutput, AnnealingSchedule, ExactGates, GateFamily, QpeGates, ScheduleConfig};
use crate::error::{CoreError, Result};
use crate::markov::{build_transition_matrix, tv_distance, ProposalKernel, StateSpace, TargetModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    Exact,
    Qpe,
}

/// Gap, conditioning and minimum probability over `beta in {1/g, ..., 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathConstants {
    pub gap_min: f64,
    pub kappa_min: f64,
    pub p_min: f64,
    pub l_bar: f64,
    pub l_max: f64,
    pub colsum: f64,
}

pub fn path_constants(model: &TargetModel, t: &ProposalKernel, grid: usize) -> Result<PathConstants> {
    let grid = grid.max(1);
    let (mut gap_min, mut kappa_min, mut p_min) = (f64::INFINITY, 0.0f64, f64::INFINITY);
    for k in 1..=grid {
        let beta = k as f64 / grid as f64;
        let at = model.at_beta(beta);
        let chain = build_transition_matrix(&at, t)?;
        gap_min = gap_min.min(chain.gap);
        kappa_min = kappa_min.max(chain.kappa);
        p_min = p_min.min(chain.pi_min());
    }
    if !(gap_min > 0.0) {
        return Err(CoreError::Assumption(format!("spectral gap lower bound {gap_min} on the beta path is not positive")));
    }
    Ok(PathConstants {
        gap_min,
        kappa_min,
        p_min,
        l_bar: model.prior_mean_likelihood(),
        l_max: model.max_likelihood(),
        colsum: t.max_offdiag_column_sum(),
    })
}

/// The three candidates whose minimum is the internal QMCI accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InternalAccuracy {
    pub tv_term: f64,
    pub gap_term: f64,
    pub likelihood_term: f64,
    pub value: f64,
}

/// `min{ D eps / (8 (D ceil(log(2 sqrt Pmin)/log(1-D)) + 1)), D / (16 sqrt(colsum) kappa), Lbar / 2 }`.
pub fn internal_accuracy(c: &PathConstants, eps: f64) -> InternalAccuracy {
    let d = c.gap_min;
    let ceil_term = if d >= 1.0 {
        0.0
    } else {
        ((2.0 * c.p_min.sqrt()).ln() / (1.0 - d).ln()).ceil().max(0.0)
    };
    let tv_term = d * eps / (8.0 * (d * ceil_term + 1.0));
    let gap_term = d / (16.0 * c.colsum.sqrt() * c.kappa_min);
    let likelihood_term = c.l_bar / 2.0;
    InternalAccuracy { tv_term, gap_term, likelihood_term, value: tv_term.min(gap_term).min(likelihood_term) }
}

/// Residual budget of one approximate walk application inside a gate of accuracy `delta`.
pub fn walk_delta(delta: f64, gap_min: f64) -> f64 {
    delta * gap_min.sqrt() / (1.0 / delta).ln().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsaQmciConfig {
    pub eps: f64,
    pub delta: f64,
    pub mode: QmciMode,
    pub gates: GateMode,
    pub seed: u64,
    pub beta_grid: usize,
    pub max_ancillas: u32,
}

impl QsaQmciConfig {
    pub fn new(eps: f64, delta: f64, seed: u64) -> Self {
        Self { eps, delta, mode: QmciMode::Emulated, gates: GateMode::Exact, seed, beta_grid: 20, max_ancillas: 24 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QsaQmciOutcome {
    pub constants: PathConstants,
    pub accuracy: InternalAccuracy,
    pub approx: Option<AcceptanceApprox>,
    /// Exact stationary distribution of `C_{L~}`.
    pub p_tilde: Vec<f64>,
    pub p: Vec<f64>,
    pub tv: f64,
    pub schedule: AnnealingSchedule,
    #[serde(skip)]
    pub generated: Option<AnnealOutput>,
    /// `R_S` distribution of the prepared state.
    pub sampled: Option<Vec<f64>>,
    pub queries_per_walk: u64,
    pub walk_calls: u128,
    pub total_queries: u128,
    /// Queries spent emulating the classical table of estimates.
    pub table_queries: u64,
}

impl QsaQmciOutcome {
    pub fn success(&self) -> bool {
        self.schedule.flag && self.generated.is_some()
    }
}

/// QSA driven by `C_{L~}` with `L~` from QMCI at the internal accuracy.
pub fn qsa_with_qmci(
    oracle: &LikelihoodOracle,
    model: &TargetModel,
    space: &StateSpace,
    t: &ProposalKernel,
    cfg: &QsaQmciConfig,
) -> Result<QsaQmciOutcome> {
    let constants = path_constants(model, t, cfg.beta_grid)?;
    let accuracy = internal_accuracy(&constants, cfg.eps);
    let wd = walk_delta(cfg.delta, constants.gap_min);
    let before = oracle.queries();
    let (target, approx, queries_per_walk) = if accuracy.value > 0.0 {
        let a = approx_acceptance_table(oracle, model, t, accuracy.value, wd / 2.0, cfg.mode, cfg.seed)?;
        let q = a.per_entry_charge.saturating_mul(2);
        (a.target.clone(), Some(a), q)
    } else {
        (model.clone(), None, 0)
    };
    let table_queries = oracle.queries() - before;
    anneal(model, &target, space, t, cfg, Run { constants, accuracy, approx, queries_per_walk, table_queries })
}

/// QSA on the exact likelihood, charging `queries_per_walk` per walk
/// application (`8M` when every `L` evaluation sums all `M` terms).
pub fn qsa_exact(
    model: &TargetModel,
    space: &StateSpace,
    t: &ProposalKernel,
    cfg: &QsaQmciConfig,
    queries_per_walk: u64,
) -> Result<QsaQmciOutcome> {
    let constants = path_constants(model, t, cfg.beta_grid)?;
    let accuracy = internal_accuracy(&constants, cfg.eps);
    anneal(model, model, space, t, cfg, Run { constants, accuracy, approx: None, queries_per_walk, table_queries: 0 })
}

struct Run {
    constants: PathConstants,
    accuracy: InternalAccuracy,
    approx: Option<AcceptanceApprox>,
    queries_per_walk: u64,
    table_queries: u64,
}

fn anneal(
    model: &TargetModel,
    target: &TargetModel,
    space: &StateSpace,
    t: &ProposalKernel,
    cfg: &QsaQmciConfig,
    run: Run,
) -> Result<QsaQmciOutcome> {
    let Run { constants, accuracy, approx, queries_per_walk, table_queries } = run;
    let gap_for_gates = constants.gap_min / 2.0;
    let family: Box<dyn GateFamily> = match cfg.gates {
        GateMode::Exact => Box::new(ExactGates::new(target.clone(), gap_for_gates)?),
        GateMode::Qpe => Box::new(QpeGates::new(target.clone(), space, t.clone(), gap_for_gates, cfg.max_ancillas)?),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let schedule = qsa_schedule(family.as_ref(), &ScheduleConfig::new(cfg.eps, cfg.delta), &mut rng)?;
    let generated = if schedule.flag { Some(qsa_generate(family.as_ref(), &schedule, cfg.eps)?) } else { None };
    let sampled = generated.as_ref().map(|g| {
        let p = family.marginal(&g.state);
        let s: f64 = p.iter().sum();
        p.into_iter().map(|v| v / s).collect()
    });
    let p_tilde = target.distribution();
    let p = model.distribution();
    let tv = tv_distance(&p_tilde, &p);
    let walk_calls = schedule.walk_calls().saturating_add(generated.as_ref().map_or(0, |g| g.walk_calls));
    Ok(QsaQmciOutcome {
        constants,
        accuracy,
        approx,
        p_tilde,
        p,
        tv,
        schedule,
        generated,
        sampled,
        queries_per_walk,
        walk_calls,
        total_queries: walk_calls.saturating_mul(queries_per_walk as u128),
        table_queries,
    })
}
