//! Result encoding. CSV writes an unbounded limit as an empty cell next to a
//! `*_infinite` flag column; JSON writes the strings `"-inf"` and `"+inf"`.

use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// An interval limit that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limit(pub f64);

impl Serialize for Limit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("+inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

/// Cell text for a finite-or-infinite value.
pub fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn flag(v: f64) -> &'static str {
    if v.is_infinite() {
        "true"
    } else {
        "false"
    }
}

/// Writes a CSV table from a header and string rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(header).map_err(|e| csv_io(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
