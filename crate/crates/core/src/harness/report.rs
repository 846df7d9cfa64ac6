//! Aggregated invalidation/cost table and its JSON, CSV and text forms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::generators::CounterfactualRecord;
use crate::harness::config::ReportFormat;
use crate::harness::ensemble::EnsembleKind;
use crate::harness::metrics::{invalidation_rate, regress_cost_iv};
use crate::linalg::{mean, std_dev};
use crate::nn::Network;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| Stat {
            mean: mean(values),
            std: std_dev(values),
        })
    }
}

/// One table row: a base method or its SNS refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub origin_count: usize,
    pub success_count: usize,
    pub success_rate: f64,
    pub cost_l1: Option<Stat>,
    pub cost_l2: Option<Stat>,
    /// Keyed by ensemble (`loo`, `rs`).
    pub iv: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub r_squared: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dataset_fingerprint: String,
    pub base_model: String,
    pub model_spec: Vec<usize>,
    pub origin_count: usize,
    pub ensemble_sizes: BTreeMap<String, usize>,
    pub success_floor: f64,
    pub notes: Vec<String>,
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvalidationReport {
    pub schema_version: u32,
    pub rows: Vec<MethodRow>,
    /// ℓ2 cost against IV, pooled over rows and ensembles.
    pub regression: Option<RegressionSummary>,
    pub regression_error: Option<String>,
    pub meta: ReportMeta,
}

/// IV of one successful record against each ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEvaluation {
    pub method: String,
    pub origin_index: usize,
    pub cost_l2: f64,
    pub iv: BTreeMap<String, f64>,
}

/// Evaluates every successful record against every ensemble, in record
/// order.
pub fn evaluate_records(
    records: &[CounterfactualRecord],
    base: &Network,
    ensembles: &[(EnsembleKind, Vec<Network>)],
) -> Result<Vec<RecordEvaluation>> {
    use rayon::prelude::*;
    records
        .par_iter()
        .filter(|r| r.success)
        .map(|r| {
            let mut iv = BTreeMap::new();
            for (kind, members) in ensembles {
                iv.insert(kind.key().to_string(), invalidation_rate(r, base, members)?);
            }
            Ok(RecordEvaluation {
                method: r.label(),
                origin_index: r.origin_index,
                cost_l2: r.cost_l2,
                iv,
            })
        })
        .collect()
}

/// Folds records and their evaluations into table rows, one per label in
/// `row_order`; successes only enter cost and IV statistics.
pub fn aggregate(
    row_order: &[String],
    records: &[CounterfactualRecord],
    evaluations: &[RecordEvaluation],
    origin_count: usize,
    meta: ReportMeta,
) -> InvalidationReport {
    let mut rows = Vec::with_capacity(row_order.len());
    let mut pooled = Vec::new();
    for label in row_order {
        let successes: Vec<&CounterfactualRecord> = records
            .iter()
            .filter(|r| r.success && &r.label() == label)
            .collect();
        let l1: Vec<f64> = successes.iter().map(|r| r.cost_l1).collect();
        let l2: Vec<f64> = successes.iter().map(|r| r.cost_l2).collect();
        let mut per_kind: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for e in evaluations.iter().filter(|e| &e.method == label) {
            for (k, v) in &e.iv {
                per_kind.entry(k.clone()).or_default().push(*v);
                pooled.push((e.cost_l2, *v));
            }
        }
        rows.push(MethodRow {
            method: label.clone(),
            origin_count,
            success_count: successes.len(),
            success_rate: if origin_count == 0 {
                0.0
            } else {
                successes.len() as f64 / origin_count as f64
            },
            cost_l1: Stat::of(&l1),
            cost_l2: Stat::of(&l2),
            iv: per_kind
                .into_iter()
                .filter_map(|(k, v)| Stat::of(&v).map(|s| (k, s)))
                .collect(),
        });
    }
    let (regression, regression_error) = match regress_cost_iv(&pooled) {
        Ok(r) => (
            Some(RegressionSummary {
                r_squared: r.r_squared,
                slope: r.slope,
                intercept: r.intercept,
                points: pooled.len(),
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    InvalidationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        rows,
        regression,
        regression_error,
        meta,
    }
}

impl InvalidationReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "report schema version {} is not supported",
                r.schema_version
            )));
        }
        Ok(r)
    }

    fn kinds(&self) -> Vec<String> {
        self.meta.ensemble_sizes.keys().cloned().collect()
    }

    /// One row per method × ensemble.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "method", "ensemble", "success_rate", "iv_mean", "iv_std", "cost_l1_mean",
            "cost_l1_std", "cost_l2_mean", "cost_l2_std", "below_floor",
        ];
        let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
        w.write_record(header).map_err(csv_err)?;
        let fmt_opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for row in &self.rows {
            for kind in self.kinds() {
                let iv = row.iv.get(&kind);
                w.write_record([
                    row.method.clone(),
                    kind.clone(),
                    row.success_rate.to_string(),
                    fmt_opt(iv.map(|s| s.mean)),
                    fmt_opt(iv.map(|s| s.std)),
                    fmt_opt(row.cost_l1.map(|s| s.mean)),
                    fmt_opt(row.cost_l1.map(|s| s.std)),
                    fmt_opt(row.cost_l2.map(|s| s.mean)),
                    fmt_opt(row.cost_l2.map(|s| s.std)),
                    (row.success_rate < self.meta.success_floor).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    /// Fixed-width table: success rate, IV per ensemble and costs as
    /// `mean (std)`; rows below the success floor show `-`.
    pub fn to_text(&self) -> String {
        let kinds = self.kinds();
        let mut header = vec!["Method".to_string(), "Success".to_string()];
        header.extend(kinds.iter().map(|k| format!("IV {}", k.to_uppercase())));
        header.push("Cost L1".into());
        header.push("Cost L2".into());
        let cell = |s: Option<Stat>| s.map_or_else(|| "-".to_string(), |s| format!("{:.3} ({:.3})", s.mean, s.std));
        let mut table = vec![header];
        for row in &self.rows {
            let dashed = row.success_rate < self.meta.success_floor;
            let mut line = vec![row.method.clone(), format!("{:.2}", row.success_rate)];
            for k in &kinds {
                line.push(if dashed { "-".into() } else { cell(row.iv.get(k).copied()) });
            }
            for s in [row.cost_l1, row.cost_l2] {
                line.push(if dashed { "-".into() } else { cell(s) });
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in table.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(out, "{}", rule.join("-+-"));
            }
        }
        match &self.regression {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "\nIV-Cost R^2: {:.4} (slope {:.4}, {} points)",
                    r.r_squared, r.slope, r.points
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "\nIV-Cost R^2: - ({})",
                    self.regression_error.as_deref().unwrap_or("no points")
                );
            }
        }
        out
    }
}

/// Writes `report.json`, `report.csv` and/or `report.txt` into `dir`.
pub fn report_emit(report: &InvalidationReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for f in formats {
        let (name, body) = match f {
            ReportFormat::Json => ("report.json", report.to_json()?),
            ReportFormat::Csv => ("report.csv", report.to_csv()?),
            ReportFormat::Text => ("report.txt", report.to_text()),
        };
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
