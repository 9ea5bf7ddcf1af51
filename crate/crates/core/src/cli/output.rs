//! CSV result tables with `#` metadata headers.
//!
//! Numbers are written with `{:e}` (shortest round-trip scientific form),
//! so identical inputs give byte-identical files. Undefined cells, such as
//! control columns at `t = T`, are `NaN`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Bumped whenever a column is added, removed or reordered.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Extra `key: value` header lines, e.g. the λ a table belongs to.
    pub notes: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn note(mut self, key: &str, value: impl ToString) -> Self {
        self.notes.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_bytes(&self, meta: &RunMetadata) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let mut header = vec![
            ("mflqr".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("schema".to_string(), SCHEMA_VERSION.to_string()),
            ("command".to_string(), meta.command.clone()),
            ("config_sha256".to_string(), meta.config_sha256.clone()),
            ("seed".to_string(), meta.seed.to_string()),
            ("runs".to_string(), meta.n_runs.to_string()),
        ];
        header.extend(self.notes.iter().cloned());
        for (key, value) in header {
            out.extend_from_slice(format!("# {key}: {value}\n").as_bytes());
        }
        {
            let mut writer = csv::Writer::from_writer(&mut out);
            writer.write_record(&self.columns).map_err(csv_error)?;
            for row in &self.rows {
                writer
                    .write_record(row.iter().map(|x| format_number(*x)))
                    .map_err(csv_error)?;
            }
            writer.flush()?;
        }
        Ok(out)
    }

    pub fn write(&self, dir: &Path, name: &str, meta: &RunMetadata) -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, self.to_bytes(meta)?)?;
        Ok(path)
    }
}

pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:e}")
    }
}

/// Column names `prefix_r_c` for an `rows × cols` matrix in row-major order.
pub fn matrix_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| format!("{prefix}_{i}_{j}")))
        .collect()
}

pub fn vector_columns(prefix: &str, len: usize) -> Vec<String> {
    (0..len).map(|i| format!("{prefix}_{i}")).collect()
}

/// `name_mean`, `name_lo`, `name_hi` for each series name.
pub fn band_columns(names: &[&str]) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| ["mean", "lo", "hi"].map(|s| format!("{n}_{s}")))
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Invalid(format!("csv: {other:?}")),
    }
}
