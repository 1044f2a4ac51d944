//! Model files: a state space, a proposal and a likelihood given either as a
//! table of `L(x)` or as per-state terms.

use std::path::Path;

use qmh_core::qmci::LikelihoodOracle;
use qmh_core::{ProposalKernel, StateSpace, TargetModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSpec {
    Ring { n: usize },
    Line { values: Vec<f64> },
    Grid { axes: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProposalSpec {
    NearestNeighbor { stay: f64 },
    Gaussian { radius: usize, std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LikelihoodSpec {
    Table {
        neg_log_lik: Vec<f64>,
    },
    /// `L(x) = mean_i terms[x][i] + l0[x] + C`, `C` chosen so that `min L = 0`.
    Terms {
        terms: Vec<Vec<f64>>,
        #[serde(default)]
        l0: Option<Vec<f64>>,
        #[serde(default)]
        sigma: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub space: SpaceSpec,
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
    pub likelihood: LikelihoodSpec,
    pub proposal: ProposalSpec,
}

/// A model ready for the experiments.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub space: StateSpace,
    pub kernel: ProposalKernel,
    pub target: TargetModel,
    /// Term table behind `target`; a table likelihood becomes one term per state.
    pub oracle: LikelihoodOracle,
}

const BUNDLED: [(&str, &str); 3] = [
    ("two-state", include_str!("../models/two-state.json")),
    ("ring8", include_str!("../models/ring8.json")),
    ("line16", include_str!("../models/line16.json")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Model text for `bundled:<name>` references.
pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn parse_model(text: &str, origin: &str) -> Result<Model> {
    let spec: ModelSpec = serde_json::from_str(text).map_err(|e| CliError::parse(origin, &e))?;
    build_model(&spec, origin)
}

/// Loads `bundled:<name>` or a path relative to `base`.
pub fn load_model(reference: &str, base: &Path) -> Result<Model> {
    if let Some(name) = reference.strip_prefix("bundled:") {
        let text = bundled(name).ok_or_else(|| {
            let known: Vec<_> = bundled_names().collect();
            CliError::field(reference, "model", format!("no bundled model `{name}` (known: {})", known.join(", ")))
        })?;
        return parse_model(text, reference);
    }
    let path = base.join(reference);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    parse_model(&text, &path.display().to_string())
}

pub fn build_model(spec: &ModelSpec, origin: &str) -> Result<Model> {
    let field = |f: &str, e: qmh_core::CoreError| CliError::field(origin, f, e.to_string());
    let space = match &spec.space {
        SpaceSpec::Ring { n } => StateSpace::ring(*n),
        SpaceSpec::Line { values } => StateSpace::line(values.clone()),
        SpaceSpec::Grid { axes } => StateSpace::grid(axes.clone()),
    }
    .map_err(|e| field("space", e))?;
    let n = space.len();
    let kernel = match spec.proposal {
        ProposalSpec::NearestNeighbor { stay } => ProposalKernel::nearest_neighbor(&space, stay),
        ProposalSpec::Gaussian { radius, std } => ProposalKernel::gaussian(&space, radius, std),
    }
    .map_err(|e| field("proposal", e))?;
    let oracle = match &spec.likelihood {
        LikelihoodSpec::Table { neg_log_lik } => {
            if neg_log_lik.len() != n {
                return Err(CliError::field(origin, "likelihood.neg_log_lik", format!("{} values for {n} states", neg_log_lik.len())));
            }
            LikelihoodOracle::new(neg_log_lik.iter().map(|&v| vec![v]).collect(), vec![0.0; n], 0.0, None)
        }
        LikelihoodSpec::Terms { terms, l0, sigma } => {
            if terms.len() != n {
                return Err(CliError::field(origin, "likelihood.terms", format!("{} rows for {n} states", terms.len())));
            }
            LikelihoodOracle::normalized(terms.clone(), l0.clone().unwrap_or_else(|| vec![0.0; n]), *sigma)
        }
    }
    .map_err(|e| field("likelihood", e))?;
    let l = oracle.likelihoods();
    let target = match &spec.prior {
        Some(p) if p.len() != n => return Err(CliError::field(origin, "prior", format!("{} values for {n} states", p.len()))),
        Some(p) => TargetModel::new(p.clone(), l),
        None => TargetModel::with_uniform_prior(l),
    }
    .map_err(|e| field("prior", e))?;
    Ok(Model { name: spec.name.clone(), space, kernel, target, oracle })
}
