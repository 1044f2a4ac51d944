use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cdf::PreparedState;
use super::classical::classical_credible;
use super::credible::{credible_interval, QmciTail};
use super::gw::{synth_gw_instance, GwInstance, GwParams};
use crate::error::{CoreError, Result};
use crate::linalg::fit_slope;
use crate::markov::{build_transition_matrix, classical_sample_count, recommended_burn_in, run_mh};
use crate::qmci::{qsa_exact, qsa_with_qmci, QsaQmciConfig, QsaQmciOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    ExactQsa,
    ClassicalMh,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::ExactQsa, Method::ClassicalMh];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::ExactQsa => "exact-qsa",
            Method::ClassicalMh => "classical-mh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub ms: Vec<usize>,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    pub axis: usize,
    pub seed: u64,
    /// Instance template; its `m` is overwritten per run.
    pub instance: GwParams,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            ms: vec![256, 512, 1024, 2048, 4096],
            methods: Method::ALL.to_vec(),
            alpha: 0.5,
            eps: 0.1,
            delta: 0.1,
            axis: 0,
            seed: 7,
            instance: GwParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRecord {
    pub method: Method,
    pub m: usize,
    pub sigma: f64,
    pub eps: f64,
    pub gap_min: f64,
    /// Schedule search (quantum) or burn-in plus chain (classical).
    pub setup_queries: u128,
    /// Tail-mass estimates of the two bound searches.
    pub search_queries: u128,
    pub queries: u128,
    /// Walk applications, or chain steps for the classical method.
    pub walk_calls: u128,
    pub bounds: Option<(f64, f64)>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSlope {
    pub method: Method,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub config: ScalingConfig,
    pub records: Vec<ScalingRecord>,
    pub slopes: Vec<MethodSlope>,
}

impl ScalingReport {
    pub fn slope(&self, method: Method) -> Option<f64> {
        self.slopes.iter().find(|s| s.method == method).map(|s| s.slope)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,m,sigma,eps,gap_min,setup_queries,search_queries,queries,walk_calls,success\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.method.name(),
                r.m,
                r.sigma,
                r.eps,
                r.gap_min,
                r.setup_queries,
                r.search_queries,
                r.queries,
                r.walk_calls,
                r.success
            ));
        }
        out
    }
}

fn quantum_record(inst: &GwInstance, method: Method, out: &QsaQmciOutcome, cfg: &ScalingConfig) -> Result<ScalingRecord> {
    let m = inst.m();
    let base = ScalingRecord {
        method,
        m,
        sigma: inst.measured_sigma(),
        eps: cfg.eps,
        gap_min: out.constants.gap_min,
        setup_queries: out.schedule.walk_calls().saturating_mul(out.queries_per_walk as u128),
        search_queries: 0,
        queries: 0,
        walk_calls: out.walk_calls,
        bounds: None,
        success: false,
    };
    if !out.success() {
        return Ok(ScalingRecord { queries: base.setup_queries, ..base });
    }
    let prep = PreparedState::from_anneal(out)?;
    let mut est = QmciTail { prep: &prep, space: &inst.space, axis: cfg.axis, rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ m as u64) };
    let ci = credible_interval(cfg.axis, cfg.alpha, cfg.eps, cfg.delta / 2.0, &inst.space, &mut est)?;
    let search_queries = ci.queries();
    let calls = (ci.lower.calls.len() + ci.upper.calls.len()) as u128;
    Ok(ScalingRecord {
        search_queries,
        queries: base.setup_queries.saturating_add(search_queries),
        walk_calls: base.walk_calls.saturating_add(calls.saturating_mul(out.generated.as_ref().map_or(0, |g| g.walk_calls))),
        bounds: ci.bounds(),
        success: true,
        ..base
    })
}

/// Annealing settings of the credible-interval pipelines: the prepared state
/// is `eps/27`-close, which also bounds the TV budget `eps/9`.
pub fn pipeline_config(cfg: &ScalingConfig) -> QsaQmciConfig {
    QsaQmciConfig::new(cfg.eps / 27.0, cfg.delta / 2.0, cfg.seed)
}

/// One credible-interval estimation on `inst` with the chosen method.
pub fn run_method(inst: &GwInstance, method: Method, cfg: &ScalingConfig) -> Result<ScalingRecord> {
    let t = inst.proposal()?;
    let qcfg = pipeline_config(cfg);
    match method {
        Method::Proposed => {
            let out = qsa_with_qmci(&inst.oracle, &inst.model, &inst.space, &t, &qcfg)?;
            quantum_record(inst, method, &out, cfg)
        }
        Method::ExactQsa => {
            // each entry computes and uncomputes L at x and y, twice per walk
            let per_walk = 8 * inst.m() as u64;
            let out = qsa_exact(&inst.model, &inst.space, &t, &qcfg, per_walk)?;
            quantum_record(inst, method, &out, cfg)
        }
        Method::ClassicalMh => {
            let chain = build_transition_matrix(&inst.model, &t)?;
            let prior = inst.model.prior();
            let burn_in = recommended_burn_in(&chain, prior);
            let n = classical_sample_count(1.0, &chain, prior, burn_in, cfg.eps);
            let sample = run_mh(&inst.model, &inst.space, &t, burn_in, n, cfg.seed)?;
            let ci = classical_credible(&sample, &inst.space, cfg.axis, cfg.alpha)?;
            let setup = sample.likelihood_evaluations as u128 * inst.m() as u128;
            Ok(ScalingRecord {
                method,
                m: inst.m(),
                sigma: inst.measured_sigma(),
                eps: cfg.eps,
                gap_min: chain.gap,
                setup_queries: setup,
                search_queries: 0,
                queries: setup,
                walk_calls: (burn_in + n) as u128,
                bounds: Some((ci.lower, ci.upper)),
                success: true,
            })
        }
    }
}

/// Runs every method at every `M` and fits `log(queries)` against `log(M)`.
pub fn scaling_study(cfg: &ScalingConfig) -> Result<ScalingReport> {
    if cfg.ms.len() < 2 {
        return Err(CoreError::Invalid("scaling study needs at least two values of M".into()));
    }
    let mut records = Vec::new();
    for &m in &cfg.ms {
        let inst = synth_gw_instance(&GwParams { m, ..cfg.instance.clone() })?;
        for &method in &cfg.methods {
            records.push(run_method(&inst, method, cfg)?);
        }
    }
    let slopes = cfg
        .methods
        .iter()
        .map(|&method| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter(|r| r.method == method)
                .map(|r| ((r.m as f64).ln(), (r.queries.max(1) as f64).ln()))
                .unzip();
            MethodSlope { method, slope: fit_slope(&xs, &ys) }
        })
        .collect();
    Ok(ScalingReport { config: cfg.clone(), records, slopes })
}
