use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{distance_l1, distance_l2};
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    MinL1,
    MinL2,
    MinEpsPgd,
    Sns,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MinL1 => "Min L1",
            Method::MinL2 => "Min L2",
            Method::MinEpsPgd => "Min eps PGD",
            Method::Sns => "SNS",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    /// Position of the origin in the evaluated split.
    pub origin_index: usize,
    pub origin: Vec<f64>,
    pub counterfactual: Vec<f64>,
    pub method: Method,
    /// Method that produced the starting point of an SNS refinement.
    pub base_method: Option<Method>,
    pub target_class: usize,
    pub success: bool,
    pub cost_l1: f64,
    pub cost_l2: f64,
    pub iterations_used: usize,
    /// Fingerprint of the generating network.
    pub generating_model: String,
    /// Ball radius at which a min-ε PGD search succeeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_used: Option<f64>,
    /// Set when the search restarted from a jittered point after a dead
    /// gradient at the origin.
    #[serde(default)]
    pub jittered: bool,
}

/// Arguments of [`CounterfactualRecord::build`].
pub struct RecordDraft {
    pub origin_index: usize,
    pub origin: Vec<f64>,
    pub counterfactual: Vec<f64>,
    pub method: Method,
    pub base_method: Option<Method>,
    pub target_class: usize,
    pub found: bool,
    pub iterations_used: usize,
    pub eps_used: Option<f64>,
    pub jittered: bool,
}

impl CounterfactualRecord {
    /// Finalizes a record: computes costs and sets `success` only when the
    /// generating network actually assigns the target class.
    pub fn build(net: &Network, draft: RecordDraft) -> Self {
        let success = draft.found && net.predict(&draft.counterfactual) == draft.target_class;
        CounterfactualRecord {
            cost_l1: distance_l1(&draft.origin, &draft.counterfactual),
            cost_l2: distance_l2(&draft.origin, &draft.counterfactual),
            origin_index: draft.origin_index,
            origin: draft.origin,
            counterfactual: draft.counterfactual,
            method: draft.method,
            base_method: draft.base_method,
            target_class: draft.target_class,
            success,
            iterations_used: draft.iterations_used,
            generating_model: net.fingerprint(),
            eps_used: draft.eps_used,
            jittered: draft.jittered,
        }
    }

    /// Row label such as `Min L2` or `Min L2 + SNS`.
    pub fn label(&self) -> String {
        method_label(self.method, self.base_method)
    }

    /// Checks the stored costs and, for successful records, class membership
    /// under the generating network.
    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.origin.len() != self.counterfactual.len() {
            return Err(Error::Data("origin and counterfactual differ in length".into()));
        }
        let l1 = distance_l1(&self.origin, &self.counterfactual);
        let l2 = distance_l2(&self.origin, &self.counterfactual);
        if (l1 - self.cost_l1).abs() > 1e-12 || (l2 - self.cost_l2).abs() > 1e-12 {
            return Err(Error::Data(format!(
                "record {}: stored costs ({}, {}) disagree with recomputed ({l1}, {l2})",
                self.origin_index, self.cost_l1, self.cost_l2
            )));
        }
        if self.success {
            if net.fingerprint() != self.generating_model {
                return Err(Error::Data(format!(
                    "record {} was generated by a different model",
                    self.origin_index
                )));
            }
            if net.predict(&self.counterfactual) != self.target_class {
                return Err(Error::Data(format!(
                    "record {}: counterfactual does not reach class {}",
                    self.origin_index, self.target_class
                )));
            }
        }
        Ok(())
    }
}

pub fn method_label(method: Method, base: Option<Method>) -> String {
    match base {
        Some(b) => format!("{b} + {method}"),
        None => method.to_string(),
    }
}

/// Writes one JSON object per line.
pub fn write_records(path: &Path, records: &[CounterfactualRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSON-lines record file, validating each record against `net`
/// when given.
pub fn read_records(path: &Path, net: Option<&Network>) -> Result<Vec<CounterfactualRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CounterfactualRecord = serde_json::from_str(&line)?;
        if let Some(net) = net {
            record.validate(net)?;
        }
        out.push(record);
    }
    Ok(out)
}
