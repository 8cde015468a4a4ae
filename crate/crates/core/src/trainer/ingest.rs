//! CSV ingestion for intrusion-detection style tables: one-hot encoding of
//! categorical columns, standardization of numeric columns and label
//! binarization (benign = 0, any attack class = 1).

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, TrainError};
use crate::seed;

/// Label values mapped to class 0, compared case-insensitively.
const BENIGN_LABELS: [&str; 3] = ["benign", "normal", "0"];

/// A parsed CSV file: header plus string cells.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// 1-based line number of each row in the source file.
    pub lines: Vec<u64>,
}

impl RawTable {
    pub fn read(path: impl AsRef<Path>) -> Result<RawTable, TrainError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<RawTable, TrainError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(1, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e)
            })?;
            lines.push(record.position().map_or(0, |p| p.line()));
            rows.push(record.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(RawTable {
            headers,
            rows,
            lines,
        })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

fn parse_err(line: u64, e: impl std::fmt::Display) -> TrainError {
    TrainError::ParseError {
        line,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnTransform {
    Numeric { column: usize, mean: f64, std: f64 },
    OneHot { column: usize, levels: Vec<String> },
}

/// Column transforms fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    label_column: usize,
    transforms: Vec<ColumnTransform>,
}

impl Preprocessor {
    /// Fit on `rows` (indices into `table.rows`). Columns keep their file
    /// order; a categorical column expands in place into one indicator per
    /// level, levels sorted.
    pub fn fit(
        table: &RawTable,
        label_column: &str,
        categorical: &[String],
        rows: &[usize],
    ) -> Result<Preprocessor, TrainError> {
        let label = table
            .column(label_column)
            .ok_or_else(|| TrainError::UnknownLabel(label_column.to_string()))?;
        let mut cat_idx = BTreeSet::new();
        for c in categorical {
            cat_idx.insert(table.column(c).ok_or_else(|| TrainError::UnknownColumn(c.clone()))?);
        }
        let mut transforms = Vec::new();
        for column in 0..table.headers.len() {
            if column == label {
                continue;
            }
            if cat_idx.contains(&column) {
                let levels: BTreeSet<&str> = rows.iter().map(|&r| table.rows[r][column].as_str()).collect();
                transforms.push(ColumnTransform::OneHot {
                    column,
                    levels: levels.into_iter().map(str::to_string).collect(),
                });
            } else {
                let values = rows
                    .iter()
                    .map(|&r| parse_number(table, r, column))
                    .collect::<Result<Vec<_>, _>>()?;
                let n = values.len().max(1) as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
                transforms.push(ColumnTransform::Numeric { column, mean, std });
            }
        }
        Ok(Preprocessor {
            label_column: label,
            transforms,
        })
    }

    /// Output feature dimension.
    pub fn dim(&self) -> usize {
        self.transforms
            .iter()
            .map(|t| match t {
                ColumnTransform::Numeric { .. } => 1,
                ColumnTransform::OneHot { levels, .. } => levels.len(),
            })
            .sum()
    }

    /// Transform the given rows. A categorical level not seen during fitting
    /// encodes as all zeros.
    pub fn transform(&self, table: &RawTable, rows: &[usize]) -> Result<Dataset, TrainError> {
        let mut out = Dataset::empty(self.dim());
        let mut features = Vec::with_capacity(self.dim());
        for &r in rows {
            features.clear();
            for t in &self.transforms {
                match t {
                    ColumnTransform::Numeric { column, mean, std } => {
                        features.push((parse_number(table, r, *column)? - mean) / std);
                    }
                    ColumnTransform::OneHot { column, levels } => {
                        let v = &table.rows[r][*column];
                        features.extend(levels.iter().map(|l| if l == v { 1.0 } else { 0.0 }));
                    }
                }
            }
            let raw = &table.rows[r][self.label_column];
            if raw.is_empty() {
                return Err(TrainError::ParseError {
                    line: table.lines[r],
                    message: "empty label".into(),
                });
            }
            let label = if BENIGN_LABELS.iter().any(|b| raw.eq_ignore_ascii_case(b)) {
                0
            } else {
                1
            };
            out.push(&features, label);
        }
        Ok(out)
    }
}

fn parse_number(table: &RawTable, row: usize, column: usize) -> Result<f64, TrainError> {
    let cell = &table.rows[row][column];
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(TrainError::ParseError {
            line: table.lines[row],
            message: format!("column {:?}: {cell:?} is not a finite number", table.headers[column]),
        }),
    }
}

/// Read a CSV file and fit the preprocessing on all of its rows.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    categorical: &[String],
) -> Result<Dataset, TrainError> {
    let table = RawTable::read(path)?;
    let rows: Vec<usize> = (0..table.rows.len()).collect();
    Preprocessor::fit(&table, label_column, categorical, &rows)?.transform(&table, &rows)
}

/// Read a CSV file, hold out a seeded `test_fraction` of rows, fit the
/// preprocessing on the remainder and transform both splits.
pub fn ingest_csv_split(
    path: impl AsRef<Path>,
    label_column: &str,
    categorical: &[String],
    test_fraction: f64,
    seed_value: u64,
) -> Result<(Dataset, Dataset, Preprocessor), TrainError> {
    let table = RawTable::read(path)?;
    let mut rows: Vec<usize> = (0..table.rows.len()).collect();
    rows.shuffle(&mut seed::rng(seed_value, "csv-split", &[]));
    let n_test = (test_fraction * rows.len() as f64).round() as usize;
    let (test_rows, train_rows) = rows.split_at(n_test.min(rows.len()));
    let pre = Preprocessor::fit(&table, label_column, categorical, train_rows)?;
    let train = pre.transform(&table, train_rows)?;
    let test = pre.transform(&table, test_rows)?;
    Ok((train, test, pre))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "duration,protocol,bytes,label\n1,tcp,10,normal\n2,udp,20,neptune\n3,tcp,30,BENIGN\n";

    fn table() -> RawTable {
        RawTable::from_reader(FIXTURE.as_bytes()).unwrap()
    }

    fn all(t: &RawTable) -> Vec<usize> {
        (0..t.rows.len()).collect()
    }

    #[test]
    fn one_hot_expands_dimension() {
        let t = table();
        let cats = vec!["protocol".to_string()];
        let pre = Preprocessor::fit(&t, "label", &cats, &all(&t)).unwrap();
        // 3 non-label columns; the 2-level categorical adds one
        assert_eq!(pre.dim(), 4);
        let d = pre.transform(&t, &all(&t)).unwrap();
        assert_eq!(d.labels(), &[0, 1, 0]);
        // protocol levels sorted: tcp, udp
        assert_eq!(&d.row(1)[1..3], &[0.0, 1.0]);
    }

    #[test]
    fn numeric_standardized() {
        let t = table();
        let pre = Preprocessor::fit(&t, "label", &["protocol".into()], &all(&t)).unwrap();
        let d = pre.transform(&t, &all(&t)).unwrap();
        let col: Vec<f64> = (0..3).map(|i| d.row(i)[0]).collect();
        let mean = col.iter().sum::<f64>() / 3.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        // pure function of the raw table
        assert_eq!(d, pre.transform(&t, &all(&t)).unwrap());
    }

    #[test]
    fn missing_label_column() {
        let t = table();
        assert!(matches!(
            Preprocessor::fit(&t, "class", &[], &all(&t)),
            Err(TrainError::UnknownLabel(_))
        ));
    }

    #[test]
    fn malformed_rows() {
        let bad_number = "a,label\nxyz,normal\n";
        let t = RawTable::from_reader(bad_number.as_bytes()).unwrap();
        assert!(matches!(
            Preprocessor::fit(&t, "label", &[], &[0]),
            Err(TrainError::ParseError { line: 2, .. })
        ));
        let ragged = "a,b,label\n1,2,normal\n1,normal\n";
        assert!(matches!(
            RawTable::from_reader(ragged.as_bytes()),
            Err(TrainError::ParseError { .. })
        ));
    }

    #[test]
    fn unseen_level_encodes_zero() {
        let t = table();
        let pre = Preprocessor::fit(&t, "label", &["protocol".into()], &[0, 2]).unwrap();
        assert_eq!(pre.dim(), 3);
        let d = pre.transform(&t, &[1]).unwrap();
        assert_eq!(d.row(0)[1], 0.0);
    }
}
