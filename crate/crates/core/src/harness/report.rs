use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

use super::config::{ExperimentConfig, ExperimentKind};

/// Bumped whenever a field of [`RunReport`] changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

pub const TOOL: &str = "morrey-lab";

/// One verdict with the number behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: Value,
    /// The bound or target `measured` is compared with, as a value or a short rule.
    pub tolerance: Value,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, measured: impl Into<Value>, tolerance: impl Into<Value>) -> Self {
        Self {
            name: name.into(),
            passed,
            measured: measured.into(),
            tolerance: tolerance.into(),
            detail: String::new(),
        }
    }

    /// `measured <= bound`.
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured <= bound, measured, bound)
    }

    /// `measured >= bound`.
    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured >= bound, measured, format!(">= {bound}"))
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// A CSV-ready table; also embedded in the JSON report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let line = |cells: &[String]| cells.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",");
        writeln!(out, "{}", line(&self.header))?;
        for r in &self.rows {
            writeln!(out, "{}", line(r))?;
        }
        Ok(())
    }
}

/// Self-describing result of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub results: Value,
    pub tables: Vec<Table>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub passed: bool,
    /// The only field that may differ between runs of the same configuration.
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Process exit status: 0 exactly when every check passes.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the wall-clock field zeroed: identical for identical (config, seed).
    pub fn canonical_json(&self) -> Result<String> {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        r.to_json()
    }

    /// `report.json` plus one `<table>.csv` per table; returns the written paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_json()? + "\n")?;
        written.push(path);
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            t.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            written.push(path);
        }
        Ok(written)
    }

    /// One `PASS|FAIL name measured (tolerance)` line per check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("{} {} measured={} tolerance={}", c.status(), c.name, c.measured, c.tolerance));
            if !c.detail.is_empty() {
                s.push_str(&format!(" ({})", c.detail));
            }
            s.push('\n');
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s.push_str(&format!(
            "{}: {} of {} checks passed\n",
            self.kind.name(),
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_when_needed() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["x,y".into(), "plain".into()]);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n\"x,y\",plain\n");
    }

    #[test]
    fn bounds_compare_as_documented() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert!(Check::at_least("b", 2.0, 1.8).passed);
        assert!(!Check::at_least("b", 1.7, 1.8).passed);
    }
}
