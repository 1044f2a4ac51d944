use std::fmt;
use std::path::{Path, PathBuf};

use qmh_core::inference::ScalingConfig;
use qmh_core::qmci::{GateMode, QmciMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    VerifyWalk,
    VerifyBounds,
    Anneal,
    QmciPipeline,
    CredibleInterval,
    GwScaling,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::VerifyWalk,
        ExperimentId::VerifyBounds,
        ExperimentId::Anneal,
        ExperimentId::QmciPipeline,
        ExperimentId::CredibleInterval,
        ExperimentId::GwScaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::VerifyWalk => "verify-walk",
            ExperimentId::VerifyBounds => "verify-bounds",
            ExperimentId::Anneal => "anneal",
            ExperimentId::QmciPipeline => "qmci-pipeline",
            ExperimentId::CredibleInterval => "credible-interval",
            ExperimentId::GwScaling => "gw-scaling",
        }
    }

    pub fn needs_model(self) -> bool {
        self != ExperimentId::GwScaling
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub unitarity: f64,
    pub sf: f64,
    pub block: f64,
    pub eigenvalue: f64,
    pub fixed_point: f64,
    pub unit_overlap: f64,
    pub phase: f64,
    pub invariance: f64,
    pub mixing: f64,
    pub decomposition: f64,
    pub slope: f64,
    pub sigma_growth: f64,
    /// Required fraction of seeds meeting an `(eps, delta)` guarantee.
    pub success_rate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-10,
            sf: 1e-12,
            block: 1e-10,
            eigenvalue: 1e-8,
            fixed_point: 1e-10,
            unit_overlap: 1e-9,
            phase: 1e-8,
            invariance: 1e-9,
            mixing: 1e-12,
            decomposition: 1e-9,
            slope: 0.15,
            sigma_growth: 0.15,
            success_rate: 0.9,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 13] {
        [
            ("unitarity", self.unitarity),
            ("sf", self.sf),
            ("block", self.block),
            ("eigenvalue", self.eigenvalue),
            ("fixed_point", self.fixed_point),
            ("unit_overlap", self.unit_overlap),
            ("phase", self.phase),
            ("invariance", self.invariance),
            ("mixing", self.mixing),
            ("decomposition", self.decomposition),
            ("slope", self.slope),
            ("sigma_growth", self.sigma_growth),
            ("success_rate", self.success_rate),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Modes {
    pub qmci: QmciMode,
    pub gates: GateMode,
}

impl Default for Modes {
    fn default() -> Self {
        Self { qmci: QmciMode::Emulated, gates: GateMode::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub axis: usize,
    /// Perturbation sizes for `verify-bounds`.
    pub eps_list: Vec<f64>,
    pub mixing_steps: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self { eps: 0.2, delta: 0.1, alpha: 0.5, axis: 0, eps_list: vec![0.01, 0.05, 0.1, 0.2], mixing_steps: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Model file relative to the config, or `bundled:<name>`.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub modes: Modes,
    #[serde(default)]
    pub params: Params,
    /// Settings of `gw-scaling`; its `seed` is replaced by each entry of `seeds`.
    #[serde(default)]
    pub scaling: Option<ScalingConfig>,
    /// Output directory under the output root; defaults to the experiment id.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId, model: Option<&str>) -> Self {
        Self {
            experiment,
            model: model.map(str::to_string),
            seeds: default_seeds(),
            tolerances: Tolerances::default(),
            modes: Modes::default(),
            params: Params::default(),
            scaling: None,
            output: None,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(self.experiment.name()))
    }

    /// Field-level checks that the parser cannot express.
    pub fn validate(&self, origin: &str, base: &Path) -> Result<()> {
        let err = |f: &str, m: String| Err(CliError::field(origin, f, m));
        match (&self.model, self.experiment.needs_model()) {
            (None, true) => return err("model", format!("experiment `{}` needs a model", self.experiment)),
            (Some(m), _) if !m.starts_with("bundled:") && !base.join(m).is_file() => {
                return err("model", format!("file `{}` does not exist", base.join(m).display()))
            }
            _ => {}
        }
        if self.seeds.is_empty() {
            return err("seeds", "at least one seed is required".into());
        }
        for (name, v) in self.tolerances.entries() {
            if !(v > 0.0 && v.is_finite()) {
                return err(&format!("tolerances.{name}"), format!("must be positive, got {v}"));
            }
        }
        if self.tolerances.success_rate > 1.0 {
            return err("tolerances.success_rate", "must not exceed 1".into());
        }
        let p = &self.params;
        if !(p.eps > 0.0 && p.eps < 1.0) {
            return err("params.eps", format!("must lie in (0,1), got {}", p.eps));
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return err("params.delta", format!("must lie in (0,1), got {}", p.delta));
        }
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return err("params.alpha", format!("must lie in (0,1), got {}", p.alpha));
        }
        if self.experiment == ExperimentId::CredibleInterval && p.eps >= p.alpha / 2.0 {
            return err("params.eps", format!("must be below alpha/2 = {}", p.alpha / 2.0));
        }
        if let Some(bad) = p.eps_list.iter().find(|e| !(**e >= 0.0 && **e <= 0.25)) {
            return err("params.eps_list", format!("perturbation sizes must lie in [0, 1/4], got {bad}"));
        }
        if let Some(s) = &self.scaling {
            validate_scaling(s, origin, "scaling.")?;
        }
        Ok(())
    }
}

pub fn validate_scaling(s: &ScalingConfig, origin: &str, prefix: &str) -> Result<()> {
    let err = |f: &str, m: String| Err(CliError::field(origin, &format!("{prefix}{f}"), m));
    if s.ms.len() < 2 {
        return err("ms", "needs at least two values of M".into());
    }
    if let Some(m) = s.ms.iter().find(|m| **m < 8 || **m % 2 != 0) {
        return err("ms", format!("M = {m} must be even and at least 8"));
    }
    if s.methods.is_empty() {
        return err("methods", "at least one method is required".into());
    }
    if !(s.alpha > 0.0 && s.alpha < 1.0) {
        return err("alpha", format!("must lie in (0,1), got {}", s.alpha));
    }
    if !(s.eps > 0.0 && s.eps < s.alpha / 2.0) {
        return err("eps", format!("must lie in (0, alpha/2), got {}", s.eps));
    }
    if !(s.delta > 0.0 && s.delta < 1.0) {
        return err("delta", format!("must lie in (0,1), got {}", s.delta));
    }
    if s.axis >= 2 {
        return err("axis", format!("the GW grid has two axes, got {}", s.axis));
    }
    Ok(())
}

pub fn parse_config(text: &str, origin: &str, base: &Path) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::parse(origin, &e))?;
    cfg.validate(origin, base)?;
    Ok(cfg)
}

/// Reads a config; relative model paths resolve against its directory.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((parse_config(&text, &path.display().to_string(), &base)?, base))
}

pub fn load_scaling(path: &Path) -> Result<ScalingConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let origin = path.display().to_string();
    let cfg: ScalingConfig = serde_json::from_str(&text).map_err(|e| CliError::parse(&origin, &e))?;
    validate_scaling(&cfg, &origin, "")?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, "c.json", Path::new("."))
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse(r#"{"experiment": "verify-walk", "model": "bundled:two-state"}"#).unwrap();
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.output_dir(), PathBuf::from("verify-walk"));
    }

    #[test]
    fn unknown_field_reports_position() {
        let e = parse("{\n  \"experiment\": \"anneal\",\n  \"sedes\": [1]\n}").unwrap_err();
        match e {
            CliError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("sedes"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn field_constraints() {
        let e = parse(r#"{"experiment": "anneal", "model": "bundled:ring8", "tolerances": {"phase": -1}}"#).unwrap_err();
        assert!(e.to_string().contains("tolerances.phase"));
        let e = parse(r#"{"experiment": "anneal"}"#).unwrap_err();
        assert!(e.to_string().contains("`model`"));
        let e = parse(r#"{"experiment": "anneal", "model": "missing.json"}"#).unwrap_err();
        assert!(e.to_string().contains("does not exist"));
        assert!(parse(r#"{"experiment": "gw-scaling", "scaling": {"ms": [256]}}"#).is_err());
        assert!(parse(r#"{"experiment": "teleport"}"#).is_err());
    }
}
