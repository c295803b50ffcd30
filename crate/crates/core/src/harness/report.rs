use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// Pass criterion attached to a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "kebab-case")]
pub enum Check {
    /// Strictly below the threshold.
    Below(f64),
    /// At least the threshold.
    AtLeast(f64),
    /// A boolean property encoded as 1 (true) or 0 (false).
    Holds,
    /// Reported only.
    Info,
}

impl Check {
    pub fn passes(&self, value: f64) -> Option<bool> {
        match *self {
            Check::Below(t) => Some(value < t),
            Check::AtLeast(t) => Some(value >= t),
            Check::Holds => Some(value == 1.0),
            Check::Info => None,
        }
    }

    fn label(&self) -> (&'static str, String) {
        match *self {
            Check::Below(t) => ("below", fmt_num(t)),
            Check::AtLeast(t) => ("at-least", fmt_num(t)),
            Check::Holds => ("holds", String::new()),
            Check::Info => ("info", String::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub check: Check,
    pub passed: Option<bool>,
}

/// A numeric table written as one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip representation, so output is stable and lossless.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub tag: String,
    pub parameters: serde_json::Value,
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
    pub seed: Option<u64>,
    pub version: String,
}

impl ExperimentReport {
    pub fn new(tag: &str, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            tag: tag.into(),
            parameters,
            metrics: Vec::new(),
            tables: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64, check: Check) {
        self.metrics.push(Metric {
            name: name.into(),
            value,
            check,
            passed: check.passes(value),
        });
    }

    pub fn flag(&mut self, name: &str, holds: bool) {
        self.metric(name, if holds { 1.0 } else { 0.0 }, Check::Holds);
    }

    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|m| m.value)
    }

    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.passed != Some(false))
    }

    pub fn failures(&self) -> Vec<&Metric> {
        self.metrics.iter().filter(|m| m.passed == Some(false)).collect()
    }

    /// Checks that every declared metric appears exactly once and nothing
    /// undeclared was reported.
    pub fn validate(&self, declared: &[&str]) -> Result<()> {
        for name in declared {
            let n = self.metrics.iter().filter(|m| m.name == *name).count();
            if n != 1 {
                return Err(Error::Format(format!(
                    "experiment {}: metric `{name}` reported {n} times",
                    self.tag
                )));
            }
        }
        if let Some(extra) = self.metrics.iter().find(|m| !declared.contains(&m.name.as_str())) {
            return Err(Error::Format(format!(
                "experiment {}: undeclared metric `{}`",
                self.tag, extra.name
            )));
        }
        Ok(())
    }

    /// `metrics.csv`: one row per metric.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("name,value,check,threshold,passed\n");
        for m in &self.metrics {
            let (kind, threshold) = m.check.label();
            let passed = match m.passed {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            let _ = writeln!(out, "{},{},{},{},{}", m.name, fmt_num(m.value), kind, threshold, passed);
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for m in &self.metrics {
            let status = match m.passed {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "info",
            };
            let (kind, threshold) = m.check.label();
            let rule = if threshold.is_empty() { kind.to_string() } else { format!("{kind} {threshold}") };
            let _ = writeln!(out, "  [{status}] {} = {} ({rule})", m.name, fmt_num(m.value));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_and_validation() {
        let mut r = ExperimentReport::new("demo", serde_json::json!({}), Some(1));
        r.metric("a", 0.5, Check::Below(1.0));
        r.metric("b", 0.5, Check::AtLeast(1.0));
        r.flag("c", true);
        r.metric("d", 3.0, Check::Info);
        assert!(!r.passed());
        assert_eq!(r.failures().len(), 1);
        assert!(r.validate(&["a", "b", "c", "d"]).is_ok());
        assert!(r.validate(&["a", "b", "c"]).is_err());
        assert!(r.validate(&["a", "b", "c", "d", "e"]).is_err());
        assert!(r.metrics_csv().contains("b,0.5,at-least,1.0,false"));
    }

    #[test]
    fn csv_round_trips_numbers() {
        let mut t = Table::new("t", &["x", "y"]);
        t.push(vec![0.1, 1e-300]);
        let csv = t.to_csv();
        let line = csv.lines().nth(1).unwrap();
        let parsed: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1, 1e-300]);
    }
}
