//! Common shape of verifier outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Counterexamples kept per report; the counts stay exact beyond this.
pub const MAX_COUNTEREXAMPLES: usize = 100;

/// `{checked, passed, worst_margin, counterexamples}` plus free-form details.
///
/// `worst_margin` is the smallest slack (bound minus observed value) seen
/// over all checks; negative values mean a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub name: String,
    pub checked: usize,
    pub passed: usize,
    pub worst_margin: Option<f64>,
    pub counterexamples: Vec<Value>,
    #[serde(default)]
    pub details: serde_json::Map<String, Value>,
}

impl VerifierReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checked: 0,
            passed: 0,
            worst_margin: None,
            counterexamples: Vec::new(),
            details: serde_json::Map::new(),
        }
    }

    pub fn violations(&self) -> usize {
        self.checked - self.passed
    }

    pub fn is_clean(&self) -> bool {
        self.passed == self.checked
    }

    /// Records one check with its margin; a failing check stores `example`.
    pub fn record(&mut self, passed: bool, margin: f64, example: impl FnOnce() -> Value) {
        self.checked += 1;
        if passed {
            self.passed += 1;
        } else if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
            self.counterexamples.push(example());
        }
        self.observe_margin(margin);
    }

    fn observe_margin(&mut self, margin: f64) {
        if margin.is_nan() {
            return;
        }
        self.worst_margin = Some(match self.worst_margin {
            Some(m) => m.min(margin),
            None => margin,
        });
    }

    pub fn merge(&mut self, other: VerifierReport) {
        self.checked += other.checked;
        self.passed += other.passed;
        if let Some(m) = other.worst_margin {
            self.observe_margin(m);
        }
        for ex in other.counterexamples {
            if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
                self.counterexamples.push(ex);
            }
        }
        for (k, v) in other.details {
            match (self.details.get_mut(&k), &v) {
                (Some(Value::Number(a)), Value::Number(b)) if a.is_u64() && b.is_u64() => {
                    *a = (a.as_u64().unwrap() + b.as_u64().unwrap()).into();
                }
                (Some(_), _) => {}
                (None, _) => {
                    self.details.insert(k, v);
                }
            }
        }
    }

    /// Adds `amount` to an integer counter in `details`.
    pub fn bump(&mut self, key: &str, amount: u64) {
        let entry = self.details.entry(key.to_string()).or_insert(Value::from(0u64));
        let current = entry.as_u64().unwrap_or(0);
        *entry = Value::from(current + amount);
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
