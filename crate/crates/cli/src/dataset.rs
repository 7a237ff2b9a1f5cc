//! CSV ingestion.
//!
//! Input is UTF-8 with a header row, comma separators and `.` decimals. Rows
//! are numbered from 1 for the first data row; `line` in errors is the
//! physical line in the file (header = line 1).

use std::path::{Path, PathBuf};

use permci::Model;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("line {line}, column `{column}`: missing value")]
    MissingValue { line: usize, column: String },

    #[error("line {line}, column `{column}`: `{value}` is not a number")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },

    #[error("two-sample mode needs exactly 2 groups in `{column}`, found {found:?}")]
    GroupCount { column: String, found: Vec<String> },

    #[error("regressor column `{0}` is constant")]
    ConstantRegressor(String),

    #[error("no response columns to analyse")]
    NoColumns,

    #[error("{0}")]
    Mode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    TwoSample,
    Linreg,
}

/// How to read the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub statistic: StatisticKind,
    pub group_col: Option<String>,
    pub x_col: Option<String>,
    /// Response columns; all remaining columns when absent.
    pub columns: Option<Vec<String>>,
    /// Columns to leave out when `columns` is absent (identifiers etc.).
    pub exclude: Vec<String>,
}

/// Parsed responses, column-wise. In two-sample mode the rows of the first
/// label seen in the file come first.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub column_names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    /// `[first, second]` group labels in two-sample mode.
    pub group_labels: Option<[String; 2]>,
    pub n1: usize,
    pub n2: usize,
    pub x: Option<Vec<f64>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn model(&self) -> permci::Result<Model> {
        match &self.x {
            Some(x) => Model::linreg(x.clone()),
            None => Model::two_sample(self.n1, self.n2),
        }
    }
}

fn parse_cell(raw: &str, line: usize, column: &str) -> Result<f64, IngestError> {
    let value = raw.trim();
    if value.is_empty() {
        return Err(IngestError::MissingValue {
            line,
            column: column.to_string(),
        });
    }
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::NonNumeric {
            line,
            column: column.to_string(),
            value: value.to_string(),
        }),
    }
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<Dataset, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_bytes(&bytes, opts)
}

pub fn ingest_bytes(bytes: &[u8], opts: &IngestOptions) -> Result<Dataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };

    let (group_idx, x_idx) = match opts.statistic {
        StatisticKind::TwoSample => {
            let g = opts
                .group_col
                .as_deref()
                .ok_or_else(|| IngestError::Mode("two-sample mode requires --group-col".into()))?;
            (Some(find(g)?), None)
        }
        StatisticKind::Linreg => {
            let x = opts
                .x_col
                .as_deref()
                .ok_or_else(|| IngestError::Mode("regression mode requires --x-col".into()))?;
            (None, Some(find(x)?))
        }
    };
    let response_idx: Vec<usize> = match &opts.columns {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_, _>>()?,
        None => {
            for e in &opts.exclude {
                find(e)?;
            }
            (0..header.len())
                .filter(|&i| {
                    Some(i) != group_idx && Some(i) != x_idx && !opts.exclude.contains(&header[i])
                })
                .collect()
        }
    };
    if response_idx.is_empty() {
        return Err(IngestError::NoColumns);
    }

    let mut labels: Vec<String> = Vec::new();
    let mut row_labels: Vec<usize> = Vec::new();
    let mut x = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); response_idx.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        if let Some(g) = group_idx {
            let label = record.get(g).unwrap_or("").trim();
            if label.is_empty() {
                return Err(IngestError::MissingValue {
                    line,
                    column: header[g].clone(),
                });
            }
            let id = match labels.iter().position(|l| l == label) {
                Some(id) => id,
                None => {
                    labels.push(label.to_string());
                    labels.len() - 1
                }
            };
            row_labels.push(id);
        }
        if let Some(xi) = x_idx {
            x.push(parse_cell(record.get(xi).unwrap_or(""), line, &header[xi])?);
        }
        for (col, &idx) in columns.iter_mut().zip(&response_idx) {
            col.push(parse_cell(
                record.get(idx).unwrap_or(""),
                line,
                &header[idx],
            )?);
        }
    }

    let column_names = response_idx.iter().map(|&i| header[i].clone()).collect();
    match opts.statistic {
        StatisticKind::TwoSample => {
            if labels.len() != 2 {
                return Err(IngestError::GroupCount {
                    column: header[group_idx.unwrap_or_default()].clone(),
                    found: labels,
                });
            }
            // stable: group of the first label first, file order within groups
            let order: Vec<usize> = (0..row_labels.len())
                .filter(|&r| row_labels[r] == 0)
                .chain((0..row_labels.len()).filter(|&r| row_labels[r] == 1))
                .collect();
            let n1 = row_labels.iter().filter(|&&l| l == 0).count();
            let columns = columns
                .into_iter()
                .map(|c| order.iter().map(|&r| c[r]).collect())
                .collect();
            let [first, second]: [String; 2] = labels.try_into().expect("two labels");
            Ok(Dataset {
                column_names,
                columns,
                group_labels: Some([first, second]),
                n1,
                n2: order.len() - n1,
                x: None,
            })
        }
        StatisticKind::Linreg => {
            let xname = &header[x_idx.unwrap_or_default()];
            if x.len() < 2 || x.iter().all(|&v| v == x[0]) {
                return Err(IngestError::ConstantRegressor(xname.clone()));
            }
            Ok(Dataset {
                column_names,
                columns,
                group_labels: None,
                n1: 0,
                n2: 0,
                x: Some(x),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_sample(cols: Option<Vec<&str>>) -> IngestOptions {
        IngestOptions {
            statistic: StatisticKind::TwoSample,
            group_col: Some("g".into()),
            x_col: None,
            columns: cols.map(|c| c.into_iter().map(String::from).collect()),
            exclude: vec![],
        }
    }

    #[test]
    fn two_sample_reorders_first_label_first() {
        let csv = "g,v\nb,1\na,2\nb,3\na,4\nb,5\n";
        let ds = ingest_bytes(csv.as_bytes(), &two_sample(None)).unwrap();
        assert_eq!(ds.group_labels, Some(["b".to_string(), "a".to_string()]));
        assert_eq!((ds.n1, ds.n2), (3, 2));
        assert_eq!(ds.columns, vec![vec![1.0, 3.0, 5.0, 2.0, 4.0]]);
        assert_eq!(ds.k(), 1);
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let csv = "g,v,w\na,1,2\nb,x,3\n";
        let err = ingest_bytes(csv.as_bytes(), &two_sample(None)).unwrap_err();
        match err {
            IngestError::NonNumeric {
                line,
                column,
                value,
            } => {
                assert_eq!((line, column.as_str(), value.as_str()), (3, "v", "x"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_value_and_column() {
        let csv = "g,v\na,1\nb,\n";
        assert!(matches!(
            ingest_bytes(csv.as_bytes(), &two_sample(None)),
            Err(IngestError::MissingValue { line: 3, .. })
        ));
        assert!(matches!(
            ingest_bytes(csv.as_bytes(), &two_sample(Some(vec!["nope"]))),
            Err(IngestError::MissingColumn(_))
        ));
    }

    #[test]
    fn group_count_enforced() {
        let one = "g,v\na,1\na,2\n";
        assert!(matches!(
            ingest_bytes(one.as_bytes(), &two_sample(None)),
            Err(IngestError::GroupCount { .. })
        ));
        let three = "g,v\na,1\nb,2\nc,3\n";
        assert!(matches!(
            ingest_bytes(three.as_bytes(), &two_sample(None)),
            Err(IngestError::GroupCount { .. })
        ));
    }

    #[test]
    fn regression_mode() {
        let opts = IngestOptions {
            statistic: StatisticKind::Linreg,
            group_col: None,
            x_col: Some("x".into()),
            columns: None,
            exclude: vec!["id".into()],
        };
        let csv = "id,x,y1,y2\nr1,0,1,2\nr2,1,2,2\nr3,2,2.5,4\n";
        let ds = ingest_bytes(csv.as_bytes(), &opts).unwrap();
        assert_eq!(ds.x, Some(vec![0.0, 1.0, 2.0]));
        assert_eq!(ds.column_names, vec!["y1", "y2"]);
        let flat = "id,x,y\nr1,1,1\nr2,1,2\n";
        assert!(matches!(
            ingest_bytes(flat.as_bytes(), &opts),
            Err(IngestError::ConstantRegressor(_))
        ));
    }

    #[test]
    fn mode_flags_required() {
        let opts = IngestOptions {
            statistic: StatisticKind::Linreg,
            group_col: None,
            x_col: None,
            columns: None,
            exclude: vec![],
        };
        assert!(matches!(
            ingest_bytes(b"x,y\n1,2\n", &opts),
            Err(IngestError::Mode(_))
        ));
    }
}
