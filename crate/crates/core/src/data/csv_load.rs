//! CSV ingestion with transforms fitted on the full loaded table.

use std::collections::BTreeSet;
use std::path::Path;

use crate::data::dataset::{
    ColumnKind, ColumnSchema, ColumnTransform, Dataset, SchemaFile, TransformKind,
};
use crate::error::{Error, Result};

pub fn load_schema(path: &Path) -> Result<SchemaFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema: SchemaFile = serde_json::from_str(&text)?;
    for c in &schema.columns {
        c.validate()?;
    }
    Ok(schema)
}

/// Loads a comma-separated, header-first file.
///
/// Rows with an empty cell in any used column are dropped. Label values are
/// used as class ids when every one parses as a non-negative integer, and
/// otherwise mapped to ids in sorted order.
pub fn load_csv(path: &Path, schema: &[ColumnSchema], label: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, label)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &[ColumnSchema], label: &str) -> Result<Dataset> {
    for c in schema {
        c.validate()?;
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("reading header: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let column_idx: Vec<usize> = schema.iter().map(|c| find(&c.name)).collect::<Result<_>>()?;
    let label_idx = find(label)?;

    // raw cells, complete rows only; row numbers are 1-based data rows
    let mut rows: Vec<(usize, Vec<String>, String)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
        let cells: Vec<String> = column_idx
            .iter()
            .map(|&j| record.get(j).unwrap_or("").trim().to_string())
            .collect();
        let label_cell = record.get(label_idx).unwrap_or("").trim().to_string();
        if cells.iter().any(String::is_empty) || label_cell.is_empty() {
            continue;
        }
        rows.push((i + 1, cells, label_cell));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut transforms = Vec::with_capacity(schema.len());
    let mut numeric: Vec<Option<Vec<f64>>> = Vec::with_capacity(schema.len());
    for (c, col) in schema.iter().enumerate() {
        match col.kind {
            ColumnKind::Numeric => {
                let values = rows
                    .iter()
                    .map(|(row, cells, _)| {
                        cells[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                            Error::NonNumericCell {
                                row: *row,
                                column: col.name.clone(),
                                value: cells[c].clone(),
                            }
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                transforms.push(fit_numeric(col.transform, &values));
                numeric.push(Some(values));
            }
            ColumnKind::Categorical => {
                let categories = match &col.categories {
                    Some(vocab) => {
                        if let Some((row, cells, _)) =
                            rows.iter().find(|(_, cells, _)| !vocab.contains(&cells[c]))
                        {
                            return Err(Error::UnseenCategory {
                                row: *row,
                                column: col.name.clone(),
                                value: cells[c].clone(),
                            });
                        }
                        vocab.clone()
                    }
                    None => rows
                        .iter()
                        .map(|(_, cells, _)| cells[c].clone())
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect(),
                };
                transforms.push(ColumnTransform::Onehot { categories });
                numeric.push(None);
            }
        }
    }

    let mut features = Vec::with_capacity(rows.len());
    for (r, (_, cells, _)) in rows.iter().enumerate() {
        let mut feats = Vec::new();
        for (c, t) in transforms.iter().enumerate() {
            match t {
                ColumnTransform::Onehot { categories } => {
                    let hit = categories
                        .iter()
                        .position(|k| *k == cells[c])
                        .expect("vocabulary covers every cell");
                    feats.extend((0..categories.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                }
                other => {
                    let raw = numeric[c].as_ref().expect("numeric column")[r];
                    feats.push(other.forward(raw));
                }
            }
        }
        features.push(feats);
    }

    let label_cells: Vec<&str> = rows.iter().map(|(_, _, l)| l.as_str()).collect();
    let (labels, label_names) = encode_labels(&label_cells);
    Dataset::new(features, labels, schema.to_vec(), transforms, label_names)
}

fn fit_numeric(kind: TransformKind, values: &[f64]) -> ColumnTransform {
    let n = values.len() as f64;
    match kind {
        TransformKind::Standardize => {
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            // a constant column maps to all zeros
            ColumnTransform::Standardize {
                mean,
                std: if std > 0.0 { std } else { 1.0 },
            }
        }
        TransformKind::Minmax => ColumnTransform::Minmax {
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        },
        TransformKind::None | TransformKind::Onehot => ColumnTransform::Identity,
    }
}

fn encode_labels(cells: &[&str]) -> (Vec<usize>, Vec<String>) {
    let as_ints: Option<Vec<usize>> = cells.iter().map(|c| c.parse::<usize>().ok()).collect();
    if let Some(ids) = as_ints {
        let classes = ids.iter().max().map_or(0, |m| m + 1).max(2);
        return (ids, (0..classes).map(|c| c.to_string()).collect());
    }
    let names: Vec<String> = cells
        .iter()
        .map(|c| c.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ids = cells
        .iter()
        .map(|c| names.iter().position(|n| n == c).expect("name collected"))
        .collect();
    (ids, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::RawValue;

    fn schema_std() -> Vec<ColumnSchema> {
        vec![ColumnSchema::numeric("a", TransformKind::Standardize)]
    }

    #[test]
    fn standardize_uses_population_std() {
        let ds = read_csv("a,y\n1,0\n2,1\n3,0\n".as_bytes(), &schema_std(), "y").unwrap();
        let s = (2.0f64 / 3.0).sqrt();
        let expected = [-1.0 / s, 0.0, 1.0 / s];
        for (row, e) in ds.features().iter().zip(expected) {
            assert!((row[0] - e).abs() < 1e-12);
        }
        assert!((expected[2] - 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.feature_dim(), 1);
    }

    #[test]
    fn onehot_categories() {
        let schema = vec![ColumnSchema::categorical("c")];
        let ds = read_csv("c,y\na,0\nb,1\na,1\n".as_bytes(), &schema, "y").unwrap();
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.features()[0], vec![1.0, 0.0]);
        assert_eq!(ds.features()[1], vec![0.0, 1.0]);
        assert_eq!(
            ds.inverse_transform(&[0.0, 1.0]).unwrap(),
            vec![RawValue::Category("b".into())]
        );
    }

    #[test]
    fn label_excluded_from_features() {
        let schema = vec![
            ColumnSchema::numeric("a", TransformKind::None),
            ColumnSchema::numeric("b", TransformKind::Minmax),
        ];
        let ds = read_csv("a,y,b\n1,yes,10\n2,no,20\n".as_bytes(), &schema, "y").unwrap();
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.label_names(), &["no".to_string(), "yes".to_string()]);
        assert_eq!(ds.features()[1], vec![2.0, 1.0]);
    }

    #[test]
    fn errors_are_specific() {
        let missing = read_csv("a,y\n1,0\n".as_bytes(), &schema_std(), "label");
        assert!(matches!(missing, Err(Error::MissingColumn(c)) if c == "label"));

        let bad = read_csv("a,y\n1,0\nx,1\n".as_bytes(), &schema_std(), "y");
        assert!(matches!(bad, Err(Error::NonNumericCell { row: 2, .. })));

        let mut cat = ColumnSchema::categorical("c");
        cat.categories = Some(vec!["a".into(), "b".into()]);
        let unseen = read_csv("c,y\na,0\nz,1\n".as_bytes(), &[cat], "y");
        assert!(matches!(unseen, Err(Error::UnseenCategory { row: 2, .. })));
    }

    #[test]
    fn rows_with_missing_values_are_dropped() {
        let ds = read_csv("a,y\n1,0\n,1\n3,1\n".as_bytes(), &schema_std(), "y").unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn quoted_fields_follow_csv_escaping() {
        let schema = vec![ColumnSchema::categorical("c")];
        let ds = read_csv("c,y\n\"a,b\",0\n\"c\"\"d\",1\n".as_bytes(), &schema, "y").unwrap();
        match &ds.transforms()[0] {
            ColumnTransform::Onehot { categories } => {
                assert_eq!(categories, &vec!["a,b".to_string(), "c\"d".to_string()])
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
