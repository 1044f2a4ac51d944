use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::ExperimentId;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One gated invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtMost, limit, pass: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtLeast, limit, pass: value >= limit }
    }

    /// Exact agreement of two counters.
    pub fn equal(name: impl Into<String>, a: u128, b: u128) -> Self {
        let diff = a.abs_diff(b) as f64;
        Self { name: name.into(), value: diff, relation: Relation::AtMost, limit: 0.0, pass: a == b }
    }
}

/// A plot-data or record table written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io("csv buffer", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shorthand for stringifying table cells.
#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($v.to_string()),*] };
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub model: Option<String>,
    pub seeds: Vec<u64>,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Experiment-specific details; kept pre-rendered so that 128-bit counters stay exact.
    pub results: Box<RawValue>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn new<R: Serialize>(
        experiment: ExperimentId,
        model: Option<String>,
        seeds: Vec<u64>,
        checks: Vec<Check>,
        results: &R,
        tables: Vec<Table>,
    ) -> Result<Self> {
        let pass = checks.iter().all(|c| c.pass);
        // indented one level to sit under the top-level key
        let text = serde_json::to_string_pretty(results)?.replace('\n', "\n  ");
        let results = RawValue::from_string(text)?;
        Ok(Self { experiment, model, seeds, pass, checks, results, tables })
    }

    pub fn summary(&self) -> Table {
        let mut t = Table::new("summary", &["check", "value", "relation", "limit", "pass"]);
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            t.push(row![c.name, c.value, rel, c.limit, c.pass]);
        }
        t
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Writes `report.json`, `summary.csv` and one CSV per table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        put("report.json".into(), serde_json::to_string_pretty(self)? + "\n")?;
        put("summary.csv".into(), self.summary().to_csv()?)?;
        for t in &self.tables {
            put(format!("{}.csv", t.name), t.to_csv()?)?;
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_least("b", 0.5, 0.9).pass);
        assert!(!Check::equal("c", 3, 4).pass);
        assert!(!Check::at_most("nan", f64::NAN, 1.0).pass);
    }

    #[test]
    fn table_csv() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(row![1, "q,r"]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1,\"q,r\"\n");
    }
}
