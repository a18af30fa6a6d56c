//! Report documents: named checks with tolerances, plus CSV side outputs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// How a check value is compared against its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Passes when `|value| <= tolerance`.
    Residual,
    /// Passes when `value >= -tolerance`.
    Nonnegative,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// The mathematical statement the check exercises.
    pub paper_anchor: String,
}

impl Check {
    pub fn new(name: &str, kind: Kind, value: f64, tolerance: f64, anchor: &str) -> Check {
        let pass = match kind {
            Kind::Residual => value.abs() <= tolerance,
            Kind::Nonnegative => value >= -tolerance,
        };
        Check { name: name.into(), value, tolerance, pass, paper_anchor: anchor.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportDocument {
    pub command: String,
    pub config: RunConfig,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub timestamp: u64,
    pub checks: Vec<Check>,
    /// Informational values that are not pass/fail checks.
    pub metrics: BTreeMap<String, f64>,
    pub summary: Summary,
}

impl ReportDocument {
    pub fn new(config: RunConfig, checks: Vec<Check>, metrics: BTreeMap<String, f64>) -> ReportDocument {
        let passed = checks.iter().filter(|c| c.pass).count();
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        ReportDocument {
            command: config.command.clone(),
            config,
            timestamp,
            summary: Summary { total: checks.len(), passed },
            checks,
            metrics,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.passed == self.summary.total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A report plus the CSV files that go next to it.
pub struct Output {
    pub report: ReportDocument,
    pub csv: Vec<(String, String)>,
    pub extra_files: Vec<(String, String)>,
}

impl Output {
    pub fn new(report: ReportDocument) -> Output {
        Output { report, csv: Vec::new(), extra_files: Vec::new() }
    }

    /// Writes `report.json` and the side files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        };
        write("report.json", &self.report.to_json())?;
        for (name, text) in self.csv.iter().chain(&self.extra_files) {
            write(name, text)?;
        }
        Ok(())
    }
}
