//! Report documents and their canonical JSON encoding.
//!
//! Objects are written with sorted keys and every floating-point value is
//! printed with 17 significant digits, so a document reloads to an equal
//! value and identical documents serialize to identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("repscope ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub metrics: BTreeMap<String, Metric>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command_line: Vec<String>,
    pub timestamp: String,
    /// Effective configuration, defaults included.
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Metric {
    Scalar { value: f64 },
    Integer { value: i64 },
    Text { value: String },
    Vector { values: Vec<f64> },
    Table(Table),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "table row has {} cells for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Timestamp for report provenance. `SOURCE_DATE_EPOCH` pins it for
/// reproducible output; otherwise the current UTC time is used.
pub fn report_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok());
    let time = match secs {
        Some(s) => chrono::DateTime::from_timestamp(s, 0).unwrap_or_default(),
        None => chrono::Utc::now(),
    };
    time.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl ReportDocument {
    pub fn new(command_line: Vec<String>, config: Value, timestamp: String) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            inputs: Vec::new(),
            metrics: BTreeMap::new(),
            provenance: Provenance {
                command_line,
                timestamp,
                config,
            },
        }
    }

    /// Records the SHA-256 digest of an input file.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: digest,
        });
        Ok(())
    }

    pub fn insert(&mut self, name: impl Into<String>, metric: Metric) -> Result<()> {
        let name = name.into();
        if self.metrics.contains_key(&name) {
            return Err(Error::Validation(format!("duplicate metric name '{name}'")));
        }
        self.metrics.insert(name, metric);
        Ok(())
    }

    pub fn scalar(&mut self, name: impl Into<String>, value: f64) -> Result<()> {
        self.insert(name, Metric::Scalar { value })
    }

    pub fn integer(&mut self, name: impl Into<String>, value: i64) -> Result<()> {
        self.insert(name, Metric::Integer { value })
    }

    pub fn text(&mut self, name: impl Into<String>, value: impl Into<String>) -> Result<()> {
        self.insert(name, Metric::Text { value: value.into() })
    }

    pub fn vector(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        self.insert(name, Metric::Vector { values })
    }

    pub fn table(&mut self, name: impl Into<String>, table: Table) -> Result<()> {
        self.insert(name, Metric::Table(table))
    }

    fn check_finite(&self) -> Result<()> {
        let bad = |name: &str| {
            Err(Error::Validation(format!(
                "metric '{name}' holds a non-finite value"
            )))
        };
        for (name, metric) in &self.metrics {
            let finite = match metric {
                Metric::Scalar { value } => value.is_finite(),
                Metric::Vector { values } => values.iter().all(|v| v.is_finite()),
                Metric::Table(t) => t
                    .rows
                    .iter()
                    .flatten()
                    .all(|c| !matches!(c, Cell::Float(v) if !v.is_finite())),
                Metric::Integer { .. } | Metric::Text { .. } => true,
            };
            if !finite {
                return bad(name);
            }
        }
        Ok(())
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        self.check_finite()?;
        let value = serde_json::to_value(self).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = String::new();
        write_canonical(&value, 0, &mut out);
        out.push('\n');
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))
    }

    /// Long-format CSV (`metric,row,column,value`), one line per value.
    pub fn to_csv(&self) -> Result<String> {
        self.check_finite()?;
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut emit = |fields: [&str; 4]| {
            writer
                .write_record(fields)
                .map_err(|e| Error::Format(e.to_string()))
        };
        emit(["metric", "row", "column", "value"])?;
        for (name, metric) in &self.metrics {
            match metric {
                Metric::Scalar { value } => emit([name, "", "", &format_f64(*value)])?,
                Metric::Integer { value } => emit([name, "", "", &value.to_string()])?,
                Metric::Text { value } => emit([name, "", "", value])?,
                Metric::Vector { values } => {
                    for (i, v) in values.iter().enumerate() {
                        emit([name, &i.to_string(), "", &format_f64(*v)])?;
                    }
                }
                Metric::Table(t) => {
                    for (i, row) in t.rows.iter().enumerate() {
                        for (col, cell) in t.columns.iter().zip(row) {
                            let text = match cell {
                                Cell::Int(v) => v.to_string(),
                                Cell::Float(v) => format_f64(*v),
                                Cell::Text(s) => s.clone(),
                            };
                            emit([name, &i.to_string(), col, &text])?;
                        }
                    }
                }
            }
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn save_report(report: &ReportDocument, path: &Path) -> Result<()> {
    let text = report.to_canonical_json()?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_report(path: &Path) -> Result<ReportDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ReportDocument::from_json(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// 17 significant digits: enough to round-trip every `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_canonical(value: &Value, depth: usize, out: &mut String) {
    let pad = |out: &mut String, depth: usize| out.extend(std::iter::repeat_n("  ", depth));
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_f64(n.as_f64().expect("f64 number")));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encodes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_canonical(item, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&serde_json::to_string(key).expect("key encodes"));
                out.push_str(": ");
                write_canonical(&map[*key], depth + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}
