//! Tables and their CSV / JSON encodings.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::OutputFormat;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

/// Numeric table with a leading abscissa column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_column(&mut self, name: impl Into<String>, unit: &str) {
        self.columns.push(Column {
            name: name.into(),
            unit: unit.to_string(),
        });
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv(table: &Table, out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(table.columns.iter().map(|c| format!("{}[{}]", c.name, c.unit)))
        .map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|&x| format_float(x))).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// Columns as `{name, unit}` and rows as arrays of numbers; non-finite
/// values become strings so the document stays valid JSON.
pub fn table_json(table: &Table) -> Value {
    let cols: Vec<Value> = table
        .columns
        .iter()
        .map(|c| json!({ "name": c.name, "unit": c.unit }))
        .collect();
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| Value::Array(r.iter().map(|&x| number(x)).collect()))
        .collect();
    json!({ "columns": cols, "rows": rows })
}

pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(format_float(x)))
}

pub fn write_table(table: &Table, path: &Path, format: OutputFormat) -> Result<(), CliError> {
    ensure_parent(path)?;
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(table, &mut buf)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &table_json(table)).map_err(|e| CliError::Io(e.to_string()))?;
            buf.write_all(b"\n").map_err(|e| io_err(path, e))?;
        }
    }
    buf.flush().map_err(|e| io_err(path, e))
}

pub fn write_json(value: &Value, path: &Path) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// `dir/name.csv` → `dir/name.<suffix>` with `suffix` like `summary.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e)),
        _ => Ok(()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
