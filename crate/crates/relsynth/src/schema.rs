//! Schema configuration files and CSV datasets.
//!
//! A schema is a JSON document:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "shop",
//!   "tables": [
//!     { "name": "customers", "csv": "customers.csv",
//!       "attributes": [
//!         { "name": "customer_id", "kind": "identifier", "unique": true },
//!         { "name": "segment", "kind": "categorical", "domain": ["basic", "premium"] }
//!       ] },
//!     { "name": "orders", "csv": "orders.csv",
//!       "attributes": [
//!         { "name": "customer_id", "kind": "identifier" },
//!         { "name": "amount", "kind": "numeric" },
//!         { "name": "placed", "kind": "datetime" }
//!       ] }
//!   ],
//!   "links": [ { "primary": "customers", "identifier": "customer_id", "secondary": "orders" } ]
//! }
//! ```
//!
//! CSV paths are relative to the schema file. Files are comma separated with
//! a mandatory header row; columns may appear in any order but must match
//! the declared attributes exactly. Empty cells are missing values.
//! Date-times are ISO-8601 (`2021-03-04T05:06:07Z`, an offset, no zone, or a
//! bare date) and are written back in UTC with a `Z` suffix.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use relsynth_core::{validate, AttributeKind, AttributeSpec, Link, RelationalDataset, TableData, Value};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_FORMAT_VERSION: u32 = 1;
/// File name of the schema written next to generated CSVs.
pub const SCHEMA_FILE: &str = "schema.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub name: String,
    pub csv: PathBuf,
    pub attributes: Vec<AttributeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub format_version: u32,
    pub name: String,
    pub tables: Vec<TableConfig>,
    pub links: Vec<Link>,
}

fn parse_error(file: &Path, line: u64, column: u64, message: impl Into<String>) -> Error {
    Error::Parse { file: file.to_path_buf(), line, column, message: message.into() }
}

impl SchemaConfig {
    pub fn from_path(path: &Path) -> Result<SchemaConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: SchemaConfig = serde_json::from_str(&text)
            .map_err(|e| parse_error(path, e.line() as u64, e.column() as u64, e.to_string()))?;
        if config.format_version != SCHEMA_FORMAT_VERSION {
            return Err(parse_error(
                path,
                1,
                1,
                format!("schema format_version {} is not supported (expected {SCHEMA_FORMAT_VERSION})", config.format_version),
            ));
        }
        Ok(config)
    }

    /// Schema describing `dataset` with one `<table>.csv` per table.
    pub fn for_dataset(name: &str, dataset: &RelationalDataset) -> SchemaConfig {
        SchemaConfig {
            format_version: SCHEMA_FORMAT_VERSION,
            name: name.into(),
            tables: dataset
                .tables
                .iter()
                .map(|t| TableConfig {
                    name: t.name.clone(),
                    csv: PathBuf::from(format!("{}.csv", t.name)),
                    attributes: t.attributes.clone(),
                })
                .collect(),
            links: dataset.links.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes") + "\n"
    }
}

/// Parses an ISO-8601 date-time or date to whole seconds since the epoch.
/// Values without an offset are taken as UTC.
pub fn parse_datetime(s: &str) -> Option<i64> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
}

pub fn format_datetime(seconds: i64) -> String {
    match DateTime::from_timestamp(seconds, 0) {
        Some(t) => t.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => seconds.to_string(),
    }
}

/// CSV text of a cell. Numbers use the shortest representation that reads
/// back to the same `f64`.
pub fn format_value(value: &Value) -> String {
    match value {
        Value::Number(x) => format!("{x}"),
        Value::Category(s) | Value::Id(s) => s.clone(),
        Value::Timestamp(t) => format_datetime(*t),
        Value::Missing => String::new(),
    }
}

fn parse_cell(text: &str, spec: &AttributeSpec) -> std::result::Result<Value, String> {
    if text.is_empty() {
        return Ok(Value::Missing);
    }
    match spec.kind {
        AttributeKind::Numeric => match text.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Value::Number(x)),
            _ => Err(format!("`{text}` is not a finite number (attribute `{}`)", spec.name)),
        },
        AttributeKind::DateTime => parse_datetime(text.trim())
            .map(Value::Timestamp)
            .ok_or_else(|| format!("`{text}` is not an ISO-8601 date-time (attribute `{}`)", spec.name)),
        AttributeKind::Categorical => Ok(Value::category(text)),
        AttributeKind::Identifier => Ok(Value::id(text)),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::Utf8 { err, .. } => {
            parse_error(path, line, err.field() as u64 + 1, format!("invalid UTF-8: {err}"))
        }
        kind => parse_error(path, line, 0, format!("{kind:?}")),
    }
}

/// Reads one table from its CSV file.
pub fn read_table(path: &Path, config: &TableConfig) -> Result<TableData> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for (j, h) in headers.iter().enumerate() {
        if !config.attributes.iter().any(|a| a.name == h) {
            return Err(parse_error(path, 1, j as u64 + 1, format!("column `{h}` is not declared in the schema")));
        }
        if headers.iter().take(j).any(|g| g == h) {
            return Err(parse_error(path, 1, j as u64 + 1, format!("column `{h}` appears twice")));
        }
    }
    let mut columns = Vec::with_capacity(config.attributes.len());
    for a in &config.attributes {
        let c = headers
            .iter()
            .position(|h| h == a.name)
            .ok_or_else(|| parse_error(path, 1, 1, format!("declared attribute `{}` has no column", a.name)))?;
        columns.push(c);
    }

    let mut table = TableData::new(config.name.clone(), config.attributes.clone());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = Vec::with_capacity(columns.len());
        for (spec, &c) in config.attributes.iter().zip(&columns) {
            let value = parse_cell(&record[c], spec).map_err(|m| parse_error(path, line, c as u64 + 1, m))?;
            values.push(value);
        }
        table.push(values);
    }
    Ok(table)
}

/// Reads every table, without validating the result.
pub fn read_dataset(config: &SchemaConfig, base: &Path) -> Result<RelationalDataset> {
    let tables = config
        .tables
        .iter()
        .map(|t| read_table(&base.join(&t.csv), t))
        .collect::<Result<Vec<_>>>()?;
    Ok(RelationalDataset { tables, links: config.links.clone() })
}

/// Loads and validates the dataset described by the schema at `path`.
pub fn load_dataset(path: &Path) -> Result<RelationalDataset> {
    let config = SchemaConfig::from_path(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let dataset = read_dataset(&config, base)?;
    let report = validate(&dataset);
    if !report.is_valid() {
        return Err(Error::ValidationFailed(report));
    }
    Ok(dataset)
}

pub fn write_table(path: &Path, table: &TableData) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_path(path).map_err(|e| csv_error(path, e))?;
    writer.write_record(table.attributes.iter().map(|a| a.name.as_str())).map_err(|e| csv_error(path, e))?;
    for row in &table.rows {
        writer.write_record(row.values.iter().map(format_value)).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Writes one CSV per table plus a schema file into `dir`, creating it if
/// needed. Returns the schema path.
pub fn write_dataset(dataset: &RelationalDataset, dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config = SchemaConfig::for_dataset(name, dataset);
    for (table, tc) in dataset.tables.iter().zip(&config.tables) {
        write_table(&dir.join(&tc.csv), table)?;
    }
    let schema = dir.join(SCHEMA_FILE);
    fs::write(&schema, config.to_json()).map_err(|e| Error::io(&schema, e))?;
    Ok(schema)
}
