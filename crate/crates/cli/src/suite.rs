use std::path::{Path, PathBuf};

use clap::ValueEnum;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::Result;
use crate::experiments::run_experiment;
use crate::report::ExperimentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Walk,
    Bounds,
    Anneal,
    Qmci,
    Credible,
    Gw,
}

/// Experiment configs of one suite, run against the bundled models.
pub fn suite_configs(suite: Suite) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    let want = |s: Suite| suite == Suite::All || suite == s;
    let with = |id, model: Option<&str>| ExperimentConfig::new(id, model.map(|m| format!("bundled:{m}")).as_deref());
    if want(Suite::Walk) {
        for m in ["two-state", "ring8", "line16"] {
            out.push(with(ExperimentId::VerifyWalk, Some(m)));
        }
    }
    if want(Suite::Bounds) {
        for m in ["two-state", "ring8"] {
            let mut c = with(ExperimentId::VerifyBounds, Some(m));
            c.seeds = (0..25).collect();
            out.push(c);
        }
    }
    if want(Suite::Anneal) {
        let mut c = with(ExperimentId::Anneal, Some("ring8"));
        c.seeds = (0..10).collect();
        out.push(c);
    }
    if want(Suite::Qmci) {
        let mut c = with(ExperimentId::QmciPipeline, Some("ring8"));
        c.seeds = (0..10).collect();
        out.push(c);
    }
    if want(Suite::Credible) {
        let mut c = with(ExperimentId::CredibleInterval, Some("line16"));
        c.seeds = (0..20).collect();
        c.params.eps = 0.05;
        out.push(c);
    }
    if want(Suite::Gw) {
        let mut c = with(ExperimentId::GwScaling, None);
        c.seeds = vec![7];
        out.push(c);
    }
    for c in &mut out {
        let name = match &c.model {
            Some(m) => format!("{}-{}", c.experiment, m.trim_start_matches("bundled:")),
            None => c.experiment.to_string(),
        };
        c.output = Some(PathBuf::from(name));
    }
    out
}

pub fn run_suite(suite: Suite, root: &Path) -> Result<Vec<(ExperimentConfig, ExperimentReport)>> {
    let mut out = Vec::new();
    for cfg in suite_configs(suite) {
        let report = run_experiment(&cfg, Path::new("."))?;
        report.write(&root.join(cfg.output_dir()))?;
        out.push((cfg, report));
    }
    Ok(out)
}
