//! Run manifests, check records, CSV emission and manifest comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;

/// One named pass/fail check; `name` doubles as the tag of the CSV rows it
/// produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool_version: String,
    pub subcommand: String,
    /// `pass`, `check-failed`, `config-error` or `solver-failure`.
    pub status: String,
    pub exit_code: i32,
    pub message: String,
    pub nodes_per_axis: usize,
    pub h: f64,
    pub gauss_order: usize,
    pub grading_depth: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub seed: u64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub run: RunInfo,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub checks: BTreeMap<String, CheckRecord>,
    #[serde(default)]
    pub timing: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, c)| !c.passed)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// CSV table whose first column is the check tag of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub file: String,
    header: Vec<String>,
    rows: String,
}

impl CsvTable {
    pub fn new(file: &str, columns: &[&str]) -> Self {
        let mut header = vec!["check".to_string()];
        header.extend(columns.iter().map(|c| c.to_string()));
        Self {
            file: file.into(),
            header,
            rows: String::new(),
        }
    }

    pub fn row(&mut self, tag: &str, cells: &[String]) {
        debug_assert_eq!(cells.len() + 1, self.header.len());
        self.rows.push_str(tag);
        for c in cells {
            self.rows.push(',');
            self.rows.push_str(c);
        }
        self.rows.push('\n');
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.rows)
    }
}

/// Fixed-width scientific formatting so reruns produce identical bytes.
pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricDelta {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub regression: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport {
    pub deltas: Vec<MetricDelta>,
    /// Checks that pass in the first manifest and fail in the second.
    pub broken_checks: Vec<String>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty() && self.broken_checks.is_empty()
    }

    pub fn has_regression(&self) -> bool {
        !self.broken_checks.is_empty() || self.deltas.iter().any(|d| d.regression)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("metric,a,b,delta,status\n");
        let fmt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "missing".into());
        for d in &self.deltas {
            let delta = match (d.a, d.b) {
                (Some(a), Some(b)) => num(b - a),
                _ => "missing".into(),
            };
            let status = if d.regression { "regression" } else { "within-tolerance" };
            let _ = writeln!(s, "{},{},{},{delta},{status}", d.metric, fmt(d.a), fmt(d.b));
        }
        for c in &self.broken_checks {
            let _ = writeln!(s, "check:{c},pass,fail,,regression");
        }
        s
    }
}

/// Per-metric comparison; timings are ignored. A metric regresses when it
/// is missing on one side or `|b - a| > tolerance`.
pub fn compare_manifests(a: &Manifest, b: &Manifest, tolerance: f64) -> Result<DiffReport, String> {
    if a.run.subcommand != b.run.subcommand {
        return Err(format!(
            "cannot compare a '{}' run with a '{}' run",
            a.run.subcommand, b.run.subcommand
        ));
    }
    let mut keys: Vec<&String> = a.metrics.keys().chain(b.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut deltas = Vec::new();
    for k in keys {
        let (va, vb) = (a.metrics.get(k).copied(), b.metrics.get(k).copied());
        let same = match (va, vb) {
            (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
            _ => false,
        };
        if same {
            continue;
        }
        let regression = match (va, vb) {
            (Some(x), Some(y)) => !((y - x).abs() <= tolerance),
            _ => true,
        };
        deltas.push(MetricDelta {
            metric: k.clone(),
            a: va,
            b: vb,
            regression,
        });
    }
    let broken_checks = a
        .checks
        .iter()
        .filter(|(k, c)| c.passed && b.checks.get(*k).is_none_or(|cb| !cb.passed))
        .map(|(k, _)| k.clone())
        .collect();
    Ok(DiffReport { deltas, broken_checks })
}
