//! Query-count scaling study over GW instances, fanned out across
//! `(seed, M, method)` and assembled in a fixed order.

use qmh_core::inference::{run_method, synth_gw_instance, GwInstance, GwParams, Method, ScalingConfig, ScalingRecord};
use qmh_core::linalg::fit_slope;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentId, Tolerances};
use crate::error::Result;
use crate::report::{Check, ExperimentReport, Table};
use crate::row;

/// Fewest `M` values on which slopes are gated.
pub const MIN_GATED_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeededRecord {
    pub seed: u64,
    #[serde(flatten)]
    pub record: ScalingRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub method: Method,
    pub slope: f64,
    pub intercept: f64,
    pub expected: f64,
}

#[derive(Serialize)]
struct ScalingResults<'a> {
    config: &'a ScalingConfig,
    records: &'a [SeededRecord],
    slopes: &'a [SlopeFit],
}

pub fn expected_slope(method: Method) -> f64 {
    match method {
        Method::Proposed => 0.5,
        Method::ExactQsa | Method::ClassicalMh => 1.0,
    }
}

fn with_seed(base: &ScalingConfig, seed: u64) -> ScalingConfig {
    ScalingConfig { seed, instance: GwParams { seed, ..base.instance.clone() }, ..base.clone() }
}

/// Every `(seed, M, method)` run, ordered by seed, then `M`, then method.
pub fn scaling_records(base: &ScalingConfig, seeds: &[u64]) -> Result<(Vec<(u64, GwInstance)>, Vec<SeededRecord>)> {
    let keys: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| base.ms.iter().map(move |&m| (s, m))).collect();
    let instances = keys
        .par_iter()
        .map(|&(seed, m)| synth_gw_instance(&GwParams { m, ..with_seed(base, seed).instance }).map(|i| (seed, i)))
        .collect::<qmh_core::Result<Vec<_>>>()?;
    let tasks: Vec<(usize, Method)> = (0..instances.len()).flat_map(|i| base.methods.iter().map(move |&m| (i, m))).collect();
    let records = tasks
        .par_iter()
        .map(|&(i, method)| {
            let (seed, inst) = &instances[i];
            run_method(inst, method, &with_seed(base, *seed)).map(|record| SeededRecord { seed: *seed, record })
        })
        .collect::<qmh_core::Result<Vec<_>>>()?;
    Ok((instances, records))
}

/// Least-squares fit of `ln queries` on `ln M`, pooled over seeds.
pub fn fit(records: &[SeededRecord], method: Method) -> SlopeFit {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.record.method == method)
        .map(|r| ((r.record.m as f64).ln(), (r.record.queries.max(1) as f64).ln()))
        .unzip();
    let slope = fit_slope(&xs, &ys);
    let n = xs.len().max(1) as f64;
    let intercept = ys.iter().sum::<f64>() / n - slope * xs.iter().sum::<f64>() / n;
    SlopeFit { method, slope, intercept, expected: expected_slope(method) }
}

pub fn run_scaling(base: &ScalingConfig, seeds: &[u64], tol: &Tolerances) -> Result<ExperimentReport> {
    let (instances, records) = scaling_records(base, seeds)?;
    let fits: Vec<SlopeFit> = base.methods.iter().map(|&m| fit(&records, m)).collect();

    let decomposition = instances
        .iter()
        .flat_map(|(_, inst)| (0..inst.space.len()).map(move |x| (inst.oracle.likelihood(x) - inst.likelihood_direct(x)).abs()))
        .fold(0.0, f64::max);
    let mut sigma = Table::new("sigma", &["seed", "m", "sigma", "sigma_bound", "sqrt_m_prediction"]);
    let mut growth: f64 = 0.0;
    for &seed in seeds {
        let mine: Vec<&GwInstance> = instances.iter().filter(|(s, _)| *s == seed).map(|(_, i)| i).collect();
        let first = mine[0];
        for inst in &mine {
            let predicted = first.measured_sigma() * (inst.m() as f64 / first.m() as f64).sqrt();
            growth = growth.max((inst.measured_sigma() / predicted - 1.0).abs());
            sigma.push(row![seed, inst.m(), inst.measured_sigma(), inst.sigma_bound(), predicted]);
        }
    }
    let failed = records.iter().filter(|r| !r.record.success).count();
    let total: u128 = records.iter().map(|r| r.record.queries).sum();
    let parts: u128 = records.iter().map(|r| r.record.setup_queries + r.record.search_queries).sum();
    let mut checks = vec![
        Check::at_most("runs.failed", failed as f64, 0.0),
        Check::equal("ledger.stage-sum", parts, total),
        Check::at_most("gw.decomposition", decomposition, tol.decomposition),
        Check::at_most("gw.sigma-sqrt-m", growth, tol.sigma_growth),
    ];
    let gated = base.ms.len() >= MIN_GATED_POINTS;
    if gated {
        for f in &fits {
            checks.push(Check::at_most(format!("slope.{}", f.method.name()), (f.slope - f.expected).abs(), tol.slope));
        }
    }

    let mut runs = Table::new(
        "scaling",
        &["seed", "method", "m", "sigma", "eps", "gap_min", "setup_queries", "search_queries", "queries", "walk_calls", "lower", "upper", "success"],
    );
    for r in &records {
        let x = &r.record;
        let (lo, hi) = x.bounds.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
        runs.push(row![r.seed, x.method.name(), x.m, x.sigma, x.eps, x.gap_min, x.setup_queries, x.search_queries, x.queries, x.walk_calls, lo, hi, x.success]);
    }
    let mut slopes = Table::new("slopes", &["method", "slope", "intercept", "expected", "gated"]);
    let mut fitted = Table::new("fit", &["method", "m", "fitted_queries"]);
    for f in &fits {
        slopes.push(row![f.method.name(), f.slope, f.intercept, f.expected, gated]);
        for &m in &base.ms {
            fitted.push(row![f.method.name(), m, (f.intercept + f.slope * (m as f64).ln()).exp()]);
        }
    }
    let mut tables = vec![runs, slopes, fitted, sigma];
    if let Some((_, inst)) = instances.first() {
        let mut data = Table::new("gw-data", &["k", "re", "im", "psd"]);
        for k in 1..inst.m() / 2 {
            data.push(row![k, inst.data[k].re, inst.data[k].im, inst.psd[k]]);
        }
        tables.push(data);
    }
    let results = ScalingResults { config: base, records: &records, slopes: &fits };
    ExperimentReport::new(ExperimentId::GwScaling, None, seeds.to_vec(), checks, &results, tables)
}
