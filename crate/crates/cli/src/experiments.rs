use std::path::Path;

use qmh_core::annealing::stage_overlap;
use qmh_core::inference::{credible_interval, CredibleInterval, search_iterations, tail_exact, PreparedState, QmciTail, Side};
use qmh_core::markov::{build_transition_matrix, mixing_profile, tv_distance};
use qmh_core::perturbation::{perturb_likelihood, perturbation_suite};
use qmh_core::qmci::{qsa_exact, qsa_with_qmci, InternalAccuracy, PathConstants, QsaQmciConfig, QsaQmciOutcome};
use qmh_core::qsim::{build_walk_operator, lemma_checks, verify_phase_gap, AcceptanceSource, RegisterLayout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{CliError, Result};
use crate::model::{load_model, Model};
use crate::report::{Check, ExperimentReport, Table};
use crate::row;
use crate::scaling::run_scaling;

/// Largest register dimension simulated with dense matrices.
pub const MAX_DIM: usize = 1 << 14;

pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<ExperimentReport> {
    if cfg.experiment == ExperimentId::GwScaling {
        let scaling = cfg.scaling.clone().unwrap_or_default();
        return run_scaling(&scaling, &cfg.seeds, &cfg.tolerances);
    }
    let reference = cfg.model.as_deref().ok_or_else(|| CliError::field("config", "model", "missing"))?;
    let model = load_model(reference, base)?;
    let mut report = match cfg.experiment {
        ExperimentId::VerifyWalk => verify_walk(cfg, &model)?,
        ExperimentId::VerifyBounds => verify_bounds(cfg, &model)?,
        ExperimentId::Anneal => anneal(cfg, &model)?,
        ExperimentId::QmciPipeline => qmci_pipeline(cfg, &model)?,
        ExperimentId::CredibleInterval => credible(cfg, &model)?,
        ExperimentId::GwScaling => unreachable!(),
    };
    report.model = Some(model.name.clone());
    Ok(report)
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::INFINITY, f64::min)
}

fn verify_walk(cfg: &ExperimentConfig, model: &Model) -> Result<ExperimentReport> {
    let tol = &cfg.tolerances;
    let layout = RegisterLayout::new(&model.space, &model.kernel)?;
    if layout.dim() > MAX_DIM {
        return Err(CliError::field(&model.name, "space", format!("register dimension {} exceeds {MAX_DIM}", layout.dim())));
    }
    let chain = build_transition_matrix(&model.target, &model.kernel)?;
    let walk = build_walk_operator(&layout, &model.kernel, AcceptanceSource::Exact(&model.target))?;
    let lemma = lemma_checks(&walk, &chain)?;
    let gap = verify_phase_gap(&walk, &chain)?;
    let checks = vec![
        Check::at_most("walk.unitarity", lemma.unitarity_defect, tol.unitarity),
        Check::at_most("walk.sf-involution", lemma.sf_defect, tol.sf),
        Check::at_most("walk.projected-block", lemma.block_defect, tol.block),
        Check::at_most("walk.block-eigenvalues", lemma.eigenvalue_defect, tol.eigenvalue),
        Check::at_most("walk.fixed-point", lemma.fixed_point_defect, tol.fixed_point),
        Check::equal("phase-gap.unit-multiplicity", gap.unit_multiplicity as u128, 1),
        Check::at_least("phase-gap.unit-overlap", gap.unit_overlap, 1.0 - tol.unit_overlap),
        Check::at_least("phase-gap.margin", gap.min_nonzero_phase - gap.bound, -tol.phase),
        Check::at_most("phase-gap.invariance", gap.invariance_residual, tol.invariance),
    ];
    let mut phases = Table::new("phases", &["index", "theta", "abs_theta", "bound"]);
    for (i, t) in gap.phases.iter().enumerate() {
        phases.push(row![i, t, t.abs(), gap.bound]);
    }
    let results = json!({
        "dim": layout.dim(),
        "gap": chain.gap,
        "stationary": chain.pi,
        "lemmas": lemma,
        "phase_gap": gap,
    });
    Ok(ExperimentReport::new(cfg.experiment, None, cfg.seeds.clone(), checks, &results, vec![phases])?)
}

fn verify_bounds(cfg: &ExperimentConfig, model: &Model) -> Result<ExperimentReport> {
    let tol = &cfg.tolerances;
    let chain = build_transition_matrix(&model.target, &model.kernel)?;
    let profile = mixing_profile(&chain, cfg.params.mixing_steps);
    let mut mixing = Table::new("mixing", &["n", "exact", "bound"]);
    for pt in &profile {
        mixing.push(row![pt.n, pt.exact, pt.bound]);
    }
    let excess = max_of(profile.iter().map(|pt| pt.exact - pt.bound));

    let cases: Vec<(u64, f64)> = cfg.seeds.iter().flat_map(|&s| cfg.params.eps_list.iter().map(move |&e| (s, e))).collect();
    let reports = cases
        .par_iter()
        .map(|&(seed, eps)| {
            let pert = perturb_likelihood(model.target.neg_log_lik(), eps, seed);
            perturbation_suite(&model.target, &model.kernel, &pert).map(|r| (seed, eps, pert.eps, r))
        })
        .collect::<qmh_core::Result<Vec<_>>>()?;
    let mut table = Table::new(
        "perturbation",
        &["seed", "eps_target", "eps", "acceptance_max_diff", "acceptance_bound", "gap", "gap_perturbed", "gap_bound", "tv", "tv_bound", "pass"],
    );
    let mut violations = 0usize;
    let mut ratio: f64 = 0.0;
    for (seed, target, eps, r) in &reports {
        violations += usize::from(!r.acceptance.pass) + usize::from(!r.gap.pass) + usize::from(!r.tv.pass);
        if *eps > 0.0 {
            ratio = ratio.max(r.acceptance.max_diff / (8.0 * eps));
        }
        table.push(row![
            seed,
            target,
            eps,
            r.acceptance.max_diff,
            r.acceptance.bound,
            r.gap.gap,
            r.gap.gap_perturbed,
            r.gap.bound,
            r.tv.tv,
            r.tv.bound,
            r.pass()
        ]);
    }
    let checks = vec![
        Check::at_most("mixing.excess", excess, tol.mixing),
        Check::at_most("perturbation.violations", violations as f64, 0.0),
        Check::at_most("perturbation.acceptance-ratio", ratio, 1.0),
    ];
    let results = json!({
        "gap": chain.gap,
        "pi_min": chain.pi_min(),
        "cases": reports.len(),
        "perturbation": reports.iter().map(|(s, t, _, r)| json!({"seed": s, "eps_target": t, "report": r})).collect::<Vec<_>>(),
    });
    Ok(ExperimentReport::new(cfg.experiment, None, cfg.seeds.clone(), checks, &results, vec![mixing, table])?)
}

fn pipeline_cfg(cfg: &ExperimentConfig, eps: f64, delta: f64, seed: u64) -> QsaQmciConfig {
    QsaQmciConfig { mode: cfg.modes.qmci, gates: cfg.modes.gates, ..QsaQmciConfig::new(eps, delta, seed) }
}

/// Checks shared by the annealing experiments, over every seed.
fn schedule_checks(cfg: &ExperimentConfig, runs: &[(u64, QsaQmciOutcome)], eps: f64) -> Vec<Check> {
    let ok: Vec<&QsaQmciOutcome> = runs.iter().map(|(_, o)| o).filter(|o| o.success()).collect();
    let rate = ok.len() as f64 / runs.len() as f64;
    let excess_stages = max_of(runs.iter().map(|(_, o)| o.schedule.stages() as f64 - o.schedule.l_max as f64));
    let min_overlap = min_of(ok.iter().map(|o| o.schedule.min_exact_overlap()));
    let distance = max_of(ok.iter().filter_map(|o| o.generated.as_ref()).map(|g| g.distance));
    let from_ledger: u128 = runs
        .iter()
        .map(|(_, o)| o.schedule.ledger.iter().map(|e| e.walk_calls).sum::<u128>() + o.generated.as_ref().map_or(0, |g| g.walk_calls))
        .sum();
    let reported: u128 = runs.iter().map(|(_, o)| o.walk_calls).sum();
    let queries: u128 = runs.iter().map(|(_, o)| o.total_queries).sum();
    let charged: u128 = runs.iter().map(|(_, o)| o.walk_calls * o.queries_per_walk as u128).sum();
    vec![
        Check::at_least("schedule.success-rate", rate, cfg.tolerances.success_rate),
        Check::at_most("schedule.stages-over-l-max", excess_stages, 0.0),
        Check::at_least("schedule.min-overlap", if ok.is_empty() { 0.0 } else { min_overlap }, stage_overlap()),
        Check::at_most("prepared.distance", if ok.is_empty() { f64::INFINITY } else { distance }, eps),
        Check::equal("ledger.walk-calls", from_ledger, reported),
        Check::equal("ledger.queries", charged, queries),
    ]
}

fn schedule_tables(runs: &[(u64, QsaQmciOutcome)]) -> Vec<Table> {
    let mut stages = Table::new("schedule", &["seed", "stage", "beta", "estimated_overlap", "exact_overlap"]);
    let mut ledger = Table::new("ledger", &["seed", "stage", "kind", "beta_from", "beta_to", "walk_calls"]);
    for (seed, o) in runs {
        for (i, b) in o.schedule.betas.iter().enumerate() {
            let est = i.checked_sub(1).and_then(|j| o.schedule.estimated_overlaps.get(j));
            let exact = i.checked_sub(1).and_then(|j| o.schedule.exact_overlaps.get(j));
            let cell = |v: Option<&f64>| v.map_or(String::new(), |v| v.to_string());
            stages.push(row![seed, i, b, cell(est), cell(exact)]);
        }
        for e in &o.schedule.ledger {
            ledger.push(row![seed, e.stage, format!("{:?}", e.kind).to_lowercase(), e.beta_from, e.beta_to, e.walk_calls]);
        }
    }
    vec![stages, ledger]
}

#[derive(Serialize)]
struct RunSummary<'a> {
    seed: u64,
    success: bool,
    stages: usize,
    l_max: usize,
    betas: &'a [f64],
    tv: f64,
    prepared_tv: Option<f64>,
    distance: Option<f64>,
    depths: Option<&'a [u32]>,
    constants: &'a PathConstants,
    accuracy: &'a InternalAccuracy,
    queries_per_walk: u64,
    walk_calls: u128,
    total_queries: u128,
    table_queries: u64,
}

fn run_summary(seed: u64, o: &QsaQmciOutcome) -> RunSummary<'_> {
    RunSummary {
        seed,
        success: o.success(),
        stages: o.schedule.stages(),
        l_max: o.schedule.l_max,
        betas: &o.schedule.betas,
        tv: o.tv,
        prepared_tv: o.sampled.as_ref().map(|s| tv_distance(s, &o.p)),
        distance: o.generated.as_ref().map(|g| g.distance),
        depths: o.generated.as_ref().map(|g| g.depths.as_slice()),
        constants: &o.constants,
        accuracy: &o.accuracy,
        queries_per_walk: o.queries_per_walk,
        walk_calls: o.walk_calls,
        total_queries: o.total_queries,
        table_queries: o.table_queries,
    }
}

fn anneal(cfg: &ExperimentConfig, model: &Model) -> Result<ExperimentReport> {
    let p = &cfg.params;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| qsa_exact(&model.target, &model.space, &model.kernel, &pipeline_cfg(cfg, p.eps, p.delta, seed), 1).map(|o| (seed, o)))
        .collect::<qmh_core::Result<Vec<_>>>()?;
    let checks = schedule_checks(cfg, &runs, p.eps);
    let results: Vec<RunSummary> = runs.iter().map(|(s, o)| run_summary(*s, o)).collect();
    Ok(ExperimentReport::new(cfg.experiment, None, cfg.seeds.clone(), checks, &results, schedule_tables(&runs))?)
}

fn qmci_pipeline(cfg: &ExperimentConfig, model: &Model) -> Result<ExperimentReport> {
    let p = &cfg.params;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let oracle = model.oracle.clone();
            let out = qsa_with_qmci(&oracle, &model.target, &model.space, &model.kernel, &pipeline_cfg(cfg, p.eps, p.delta, seed))?;
            Ok(((seed, out), oracle.queries() - model.oracle.queries()))
        })
        .collect::<qmh_core::Result<Vec<_>>>()?;
    let (runs, counted): (Vec<_>, Vec<u64>) = runs.into_iter().unzip();
    let mut checks = schedule_checks(cfg, &runs, p.eps);
    checks.push(Check::at_most("target.tv", max_of(runs.iter().map(|(_, o)| o.tv)), p.eps));
    checks.push(Check::equal(
        "ledger.table-queries",
        counted.iter().map(|&q| q as u128).sum(),
        runs.iter().map(|(_, o)| o.table_queries as u128).sum(),
    ));
    let mut dist = Table::new("distribution", &["seed", "state", "p", "p_tilde", "prepared"]);
    for (seed, o) in &runs {
        for x in 0..o.p.len() {
            let prepared = o.sampled.as_ref().map_or(String::new(), |s| s[x].to_string());
            dist.push(row![seed, x, o.p[x], o.p_tilde[x], prepared]);
        }
    }
    let mut tables = schedule_tables(&runs);
    tables.push(dist);
    let results: Vec<RunSummary> = runs.iter().map(|(s, o)| run_summary(*s, o)).collect();
    Ok(ExperimentReport::new(cfg.experiment, None, cfg.seeds.clone(), checks, &results, tables)?)
}

#[derive(Serialize)]
struct IntervalRun<'a> {
    seed: u64,
    success: bool,
    good: bool,
    setup_queries: u128,
    interval: Option<&'a CredibleInterval>,
}

#[derive(Serialize)]
struct IntervalResults<'a> {
    level: f64,
    n_max: usize,
    runs: Vec<IntervalRun<'a>>,
}

fn credible(cfg: &ExperimentConfig, model: &Model) -> Result<ExperimentReport> {
    let p = &cfg.params;
    if p.axis >= model.space.dimension() {
        return Err(CliError::field("config", "params.axis", format!("axis {} outside a {}-dimensional space", p.axis, model.space.dimension())));
    }
    let exact = model.target.distribution();
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let oracle = model.oracle.clone();
            let out = qsa_with_qmci(&oracle, &model.target, &model.space, &model.kernel, &pipeline_cfg(cfg, p.eps / 27.0, p.delta / 2.0, seed))?;
            if !out.success() {
                return Ok((seed, None));
            }
            let prep = PreparedState::from_anneal(&out)?;
            let mut est = QmciTail { prep: &prep, space: &model.space, axis: p.axis, rng: ChaCha8Rng::seed_from_u64(seed) };
            let ci = credible_interval(p.axis, p.alpha, p.eps, p.delta / 2.0, &model.space, &mut est)?;
            Ok((seed, Some((prep.setup_queries, ci))))
        })
        .collect::<qmh_core::Result<Vec<_>>>()?;

    let level = p.alpha / 2.0;
    let tail = |side: Side, a: f64| tail_exact(&exact, &model.space, p.axis, side, a);
    let mut search = Table::new("search", &["seed", "side", "rank", "point", "estimate", "exact_tail", "queries"]);
    let mut intervals = Table::new("intervals", &["seed", "lower", "upper", "lower_tail", "upper_tail", "setup_queries", "search_queries", "good"]);
    let (mut good, mut max_iter, mut n_max) = (0usize, 0usize, 0usize);
    let (mut call_sum, mut reported) = (0u128, 0u128);
    let mut summaries = Vec::new();
    for (seed, run) in &runs {
        let Some((setup, ci)) = run else {
            intervals.push(row![seed, "", "", "", "", "", "", false]);
            summaries.push(IntervalRun { seed: *seed, success: false, good: false, setup_queries: 0, interval: None });
            continue;
        };
        for s in [&ci.lower, &ci.upper] {
            max_iter = max_iter.max(s.iterations);
            n_max = n_max.max(s.n_max);
            for c in &s.calls {
                search.push(row![seed, format!("{:?}", s.query.side).to_lowercase(), c.rank, c.point, c.estimate, tail(s.query.side, c.point)?, c.queries]);
                call_sum += c.queries;
            }
        }
        reported += ci.queries();
        let lo_tail = ci.lower.bound.map(|b| tail(Side::Lower, b)).transpose()?;
        let up_tail = ci.upper.bound.map(|b| tail(Side::Upper, b)).transpose()?;
        let ok = matches!((lo_tail, up_tail), (Some(l), Some(u)) if (l - level).abs() <= p.eps && (u - level).abs() <= p.eps);
        good += usize::from(ok);
        let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        intervals.push(row![seed, cell(ci.lower.bound), cell(ci.upper.bound), cell(lo_tail), cell(up_tail), setup, ci.queries(), ok]);
        summaries.push(IntervalRun { seed: *seed, success: true, good: ok, setup_queries: *setup, interval: Some(ci) });
    }
    let mut cdf = Table::new("cdf", &["point", "upper_tail", "lower_tail"]);
    let mut axis: Vec<f64> = model.space.axis(p.axis).to_vec();
    axis.dedup();
    for &a in &axis {
        cdf.push(row![a, tail(Side::Upper, a)?, tail(Side::Lower, a)?]);
    }
    let budget = search_iterations(axis.len());
    let checks = vec![
        Check::at_least("interval.success-rate", good as f64 / runs.len() as f64, cfg.tolerances.success_rate),
        Check::at_most("search.iterations", max_iter as f64, budget as f64),
        Check::equal("ledger.search-queries", call_sum, reported),
    ];
    let results = IntervalResults { level, n_max: n_max.max(budget), runs: summaries };
    Ok(ExperimentReport::new(cfg.experiment, None, cfg.seeds.clone(), checks, &results, vec![cdf, search, intervals])?)
}
