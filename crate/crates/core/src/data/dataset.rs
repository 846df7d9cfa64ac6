use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Standardize,
    Minmax,
    Onehot,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub transform: TransformKind,
    /// Closed vocabulary for categorical columns. When absent, the sorted
    /// distinct values of the loaded table are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSchema {
    pub fn numeric(name: &str, transform: TransformKind) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
            transform,
            categories: None,
        }
    }

    pub fn categorical(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            transform: TransformKind::Onehot,
            categories: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ColumnKind::Categorical => self.transform == TransformKind::Onehot,
            ColumnKind::Numeric => self.transform != TransformKind::Onehot,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "column `{}`: {:?} column cannot use {:?}",
                self.name, self.kind, self.transform
            )))
        }
    }
}

/// Schema file: `{columns: [...], label}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub columns: Vec<ColumnSchema>,
    pub label: String,
}

/// Fitted parameters of one source column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    Standardize { mean: f64, std: f64 },
    Minmax { min: f64, max: f64 },
    Onehot { categories: Vec<String> },
    Identity,
}

impl ColumnTransform {
    pub fn width(&self) -> usize {
        match self {
            ColumnTransform::Onehot { categories } => categories.len(),
            _ => 1,
        }
    }

    pub fn forward(&self, value: f64) -> f64 {
        match self {
            ColumnTransform::Standardize { mean, std } => (value - mean) / std,
            ColumnTransform::Minmax { min, max } => {
                let span = max - min;
                if span == 0.0 {
                    0.0
                } else {
                    (value - min) / span
                }
            }
            _ => value,
        }
    }

    pub fn inverse(&self, value: f64) -> f64 {
        match self {
            ColumnTransform::Standardize { mean, std } => value * std + mean,
            ColumnTransform::Minmax { min, max } => value * (max - min) + min,
            _ => value,
        }
    }
}

/// A raw cell recovered by the inverse transform.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Category(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    schema: Vec<ColumnSchema>,
    transforms: Vec<ColumnTransform>,
    label_names: Vec<String>,
    fingerprint: String,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        schema: Vec<ColumnSchema>,
        transforms: Vec<ColumnTransform>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if schema.len() != transforms.len() {
            return Err(Error::Data("schema and transforms differ in length".into()));
        }
        let width: usize = transforms.iter().map(ColumnTransform::width).sum();
        if let Some((i, row)) = features.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::Data(format!(
                "row {i} has {} features, expected {width}",
                row.len()
            )));
        }
        let mut ds = Dataset {
            features,
            labels,
            schema,
            transforms,
            label_names,
            fingerprint: String::new(),
        };
        ds.fingerprint = ds.compute_fingerprint();
        Ok(ds)
    }

    /// Dataset with plain numeric columns and no transform.
    pub fn from_raw(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let d = features.first().map_or(0, Vec::len);
        let schema = (0..d)
            .map(|i| ColumnSchema::numeric(&format!("x{}", i + 1), TransformKind::None))
            .collect();
        let transforms = vec![ColumnTransform::Identity; d];
        let classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
        let names = (0..classes).map(|c| c.to_string()).collect();
        Dataset::new(features, labels, schema, transforms, names)
    }

    fn compute_fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&self.schema).expect("schema serializes"));
        hasher.update(serde_json::to_vec(&self.transforms).expect("transforms serialize"));
        hasher.update(serde_json::to_vec(&self.label_names).expect("names serialize"));
        hasher.update((self.features.len() as u64).to_le_bytes());
        for (row, label) in self.features.iter().zip(&self.labels) {
            hasher.update((*label as u64).to_le_bytes());
            for v in row {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.transforms.iter().map(ColumnTransform::width).sum()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn transforms(&self) -> &[ColumnTransform] {
        &self.transforms
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Rows at `indices`, in that order, with schema and transforms kept.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(
            features,
            labels,
            self.schema.clone(),
            self.transforms.clone(),
            self.label_names.clone(),
        )
    }

    pub fn without_row(&self, index: usize) -> Result<Dataset> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != index).collect();
        self.subset(&keep)
    }

    /// Maps a transformed feature row back to raw column values.
    pub fn inverse_transform(&self, row: &[f64]) -> Result<Vec<RawValue>> {
        if row.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                got: row.len(),
            });
        }
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.transforms.len());
        for t in &self.transforms {
            let width = t.width();
            let slice = &row[offset..offset + width];
            out.push(match t {
                ColumnTransform::Onehot { categories } => {
                    let mut best = 0;
                    for (i, v) in slice.iter().enumerate() {
                        if *v > slice[best] {
                            best = i;
                        }
                    }
                    RawValue::Category(categories[best].clone())
                }
                other => RawValue::Number(other.inverse(slice[0])),
            });
            offset += width;
        }
        Ok(out)
    }

    /// Feature-index ranges of each source column.
    pub fn column_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut offset = 0;
        self.transforms
            .iter()
            .map(|t| {
                let r = offset..offset + t.width();
                offset = r.end;
                r
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_kind_transform_compatibility() {
        assert!(ColumnSchema::numeric("a", TransformKind::Standardize).validate().is_ok());
        assert!(ColumnSchema::numeric("a", TransformKind::Onehot).validate().is_err());
        let mut c = ColumnSchema::categorical("b");
        assert!(c.validate().is_ok());
        c.transform = TransformKind::Minmax;
        assert!(c.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_cells_and_order() {
        let a = Dataset::from_raw(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0, 1]).unwrap();
        let same = Dataset::from_raw(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0, 1]).unwrap();
        let cell = Dataset::from_raw(vec![vec![1.0, 2.0], vec![3.0, 4.5]], vec![0, 1]).unwrap();
        let order = Dataset::from_raw(vec![vec![3.0, 4.0], vec![1.0, 2.0]], vec![1, 0]).unwrap();
        let label = Dataset::from_raw(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![1, 1]).unwrap();
        assert_eq!(a.fingerprint(), same.fingerprint());
        assert_ne!(a.fingerprint(), cell.fingerprint());
        assert_ne!(a.fingerprint(), order.fingerprint());
        assert_ne!(a.fingerprint(), label.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn without_row_drops_exactly_one() {
        let ds = Dataset::from_raw(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0]).unwrap();
        let v = ds.without_row(1).unwrap();
        assert_eq!(v.features(), &[vec![1.0], vec![3.0]]);
        assert_eq!(v.labels(), &[0, 0]);
    }
}
