//! Structured verification records.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    TrendOnly,
}

/// One asserted comparison.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerificationReport {
    pub name: String,
    pub anchor: String,
    pub inputs: BTreeMap<String, Value>,
    pub metrics: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
    pub verdict: Verdict,
    pub provenance: BTreeMap<String, Value>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            inputs: BTreeMap::new(),
            metrics: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            checks: Vec::new(),
            failures: Vec::new(),
            verdict: Verdict::TrendOnly,
            provenance: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn input(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.inputs.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn metric(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.metrics.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn provenance(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.provenance.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    fn push(&mut self, name: &str, value: f64, bound: f64, relation: &str, pass: bool) -> bool {
        if !pass {
            self.failures.push(format!("{name}: {value:e} {relation} {bound:e} violated"));
        }
        self.checks.push(Check { name: name.into(), value, bound, relation: relation.into(), pass });
        self.refresh();
        pass
    }

    /// Records `value ≤ bound`.
    pub fn check_le(&mut self, name: &str, value: f64, bound: f64) -> bool {
        self.tolerances.insert(name.into(), bound);
        self.push(name, value, bound, "<=", value <= bound)
    }

    /// Records `value ≥ bound`.
    pub fn check_ge(&mut self, name: &str, value: f64, bound: f64) -> bool {
        self.tolerances.insert(name.into(), bound);
        self.push(name, value, bound, ">=", value >= bound)
    }

    /// Records `value < bound`.
    pub fn check_lt(&mut self, name: &str, value: f64, bound: f64) -> bool {
        self.tolerances.insert(name.into(), bound);
        self.push(name, value, bound, "<", value < bound)
    }

    pub fn check_true(&mut self, name: &str, ok: bool) -> bool {
        self.push(name, ok as u8 as f64, 1.0, "==", ok)
    }

    /// Records that `values` strictly decrease.
    pub fn check_decreasing(&mut self, name: &str, values: &[f64]) -> bool {
        let mut ok = true;
        for (i, w) in values.windows(2).enumerate() {
            ok &= self.push(&format!("{name}[{}] < {name}[{i}]", i + 1), w[1], w[0], "<", w[1] < w[0]);
        }
        ok
    }

    /// Records that `values` strictly increase.
    pub fn check_increasing(&mut self, name: &str, values: &[f64]) -> bool {
        let mut ok = true;
        for (i, w) in values.windows(2).enumerate() {
            ok &= self.push(&format!("{name}[{}] > {name}[{i}]", i + 1), w[1], w[0], ">", w[1] > w[0]);
        }
        ok
    }

    fn refresh(&mut self) {
        self.verdict = if self.checks.iter().any(|c| !c.pass) {
            Verdict::Fail
        } else if self.checks.is_empty() {
            Verdict::TrendOnly
        } else {
            Verdict::Pass
        };
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn merge(&mut self, prefix: &str, other: &VerificationReport) {
        for (k, v) in &other.metrics {
            self.metrics.insert(format!("{prefix}.{k}"), v.clone());
        }
        for c in &other.checks {
            let mut c = c.clone();
            c.name = format!("{prefix}.{}", c.name);
            if !c.pass {
                self.failures.push(format!("{}: {:e} {} {:e} violated", c.name, c.value, c.relation, c.bound));
            }
            self.checks.push(c);
        }
        self.refresh();
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_tracks_checks() {
        let mut r = VerificationReport::new("x", "a");
        assert_eq!(r.verdict, Verdict::TrendOnly);
        r.check_le("ok", 1.0, 2.0);
        assert_eq!(r.verdict, Verdict::Pass);
        r.check_decreasing("d", &[3.0, 2.0, 2.5]);
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.failures.len(), 1);
    }
}
