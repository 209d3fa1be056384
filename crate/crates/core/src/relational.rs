//! In-memory relational datasets and their structural validation.
//!
//! A dataset is relational when it has at least two tables, a primary table
//! whose identifier attribute is unique and always defined, and secondary
//! tables whose identifier values all occur in the primary table. Links are
//! stored as `(primary, identifier, secondary)` triples so that nested
//! structures can be expressed; the single-primary layout is the common case.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use hashbrown::{HashMap, HashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Categorical,
    #[serde(rename = "datetime")]
    DateTime,
    Identifier,
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttributeKind::Numeric => "numeric",
            AttributeKind::Categorical => "categorical",
            AttributeKind::DateTime => "datetime",
            AttributeKind::Identifier => "identifier",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    /// Declared value set for categoricals. When absent the domain is
    /// whatever the data contains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
    /// Declared unique: the row-to-value mapping must be injective and
    /// never missing.
    #[serde(default)]
    pub unique: bool,
}

impl AttributeSpec {
    pub fn new(name: impl Into<String>, kind: AttributeKind) -> Self {
        AttributeSpec { name: name.into(), kind, domain: None, unique: false }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, AttributeKind::Numeric)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, AttributeKind::Categorical)
    }

    pub fn datetime(name: impl Into<String>) -> Self {
        Self::new(name, AttributeKind::DateTime)
    }

    pub fn identifier(name: impl Into<String>) -> Self {
        Self::new(name, AttributeKind::Identifier)
    }

    pub fn with_domain(mut self, domain: Vec<String>) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn unique(mut self) -> Self {
        self.unique = true;
        self
    }
}

/// A single cell. Timestamps are whole seconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Number(f64),
    Category(String),
    Timestamp(i64),
    Id(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn category(s: impl Into<String>) -> Self {
        Value::Category(s.into())
    }

    pub fn id(s: impl Into<String>) -> Self {
        Value::Id(s.into())
    }

    fn matches_kind(&self, kind: AttributeKind) -> bool {
        matches!(
            (self, kind),
            (Value::Missing, _)
                | (Value::Number(_), AttributeKind::Numeric)
                | (Value::Category(_), AttributeKind::Categorical)
                | (Value::Timestamp(_), AttributeKind::DateTime)
                | (Value::Id(_), AttributeKind::Identifier)
        )
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Category(s) | Value::Id(s) => f.write_str(s),
            Value::Timestamp(t) => write!(f, "@{t}"),
            Value::Missing => f.write_str("<missing>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub values: Vec<Value>,
}

impl Row {
    pub fn new(values: Vec<Value>) -> Self {
        Row { values }
    }
}

impl From<Vec<Value>> for Row {
    fn from(values: Vec<Value>) -> Self {
        Row { values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableData {
    pub name: String,
    pub attributes: Vec<AttributeSpec>,
    pub rows: Vec<Row>,
}

impl TableData {
    pub fn new(name: impl Into<String>, attributes: Vec<AttributeSpec>) -> Self {
        TableData { name: name.into(), attributes, rows: Vec::new() }
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn push(&mut self, values: Vec<Value>) {
        self.rows.push(Row::new(values));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub primary: String,
    pub identifier: String,
    pub secondary: String,
}

impl Link {
    pub fn new(primary: impl Into<String>, identifier: impl Into<String>, secondary: impl Into<String>) -> Self {
        Link { primary: primary.into(), identifier: identifier.into(), secondary: secondary.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationalDataset {
    pub tables: Vec<TableData>,
    pub links: Vec<Link>,
}

impl RelationalDataset {
    /// Single-primary layout: every table other than `primary` is linked to it
    /// through `identifier`.
    pub fn single_primary(tables: Vec<TableData>, primary: &str, identifier: &str) -> Self {
        let links = tables
            .iter()
            .filter(|t| t.name != primary)
            .map(|t| Link::new(primary, identifier, t.name.clone()))
            .collect();
        RelationalDataset { tables, links }
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&TableData> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Primary table of the first link (the root of the usual layout).
    pub fn primary_table(&self) -> Option<&TableData> {
        self.links.first().and_then(|l| self.table(&l.primary))
    }

    pub fn identifier_attribute(&self) -> Option<&str> {
        self.links.first().map(|l| l.identifier.as_str())
    }

    pub fn total_rows(&self) -> usize {
        self.tables.iter().map(TableData::len).sum()
    }
}

/// One broken rule, with table and row coordinates where they apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    TooFewTables { count: usize },
    NoLinks,
    DuplicateTableName { table: String },
    UnknownLinkTable { table: String },
    UnknownLinkAttribute { table: String, attribute: String },
    IdentifierKind { table: String, attribute: String },
    DuplicateAttributeName { table: String, attribute: String },
    RowArity { table: String, row: usize, expected: usize, found: usize },
    KindMismatch { table: String, row: usize, attribute: String },
    OutOfDomain { table: String, row: usize, attribute: String, value: String },
    MissingUnique { table: String, row: usize, attribute: String },
    DuplicateValue { table: String, row: usize, first_row: usize, attribute: String, value: String },
    DanglingReference { table: String, row: usize, attribute: String, value: String, primary: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            TooFewTables { count } => write!(f, "dataset has {count} table(s); at least two are required"),
            NoLinks => write!(f, "dataset declares no primary/secondary link"),
            DuplicateTableName { table } => write!(f, "table name `{table}` is used more than once"),
            UnknownLinkTable { table } => write!(f, "link refers to unknown table `{table}`"),
            UnknownLinkAttribute { table, attribute } => {
                write!(f, "link identifier `{attribute}` is not an attribute of table `{table}`")
            }
            IdentifierKind { table, attribute } => {
                write!(f, "table `{table}`: link identifier `{attribute}` must have kind identifier")
            }
            DuplicateAttributeName { table, attribute } => {
                write!(f, "table `{table}`: attribute name `{attribute}` is repeated")
            }
            RowArity { table, row, expected, found } => {
                write!(f, "table `{table}` row {row}: expected {expected} values, found {found}")
            }
            KindMismatch { table, row, attribute } => {
                write!(f, "table `{table}` row {row}: value of `{attribute}` does not match its kind")
            }
            OutOfDomain { table, row, attribute, value } => {
                write!(f, "table `{table}` row {row}: `{value}` is outside the domain of `{attribute}`")
            }
            MissingUnique { table, row, attribute } => {
                write!(f, "table `{table}` row {row}: unique attribute `{attribute}` is missing")
            }
            DuplicateValue { table, row, first_row, attribute, value } => write!(
                f,
                "table `{table}` row {row}: unique attribute `{attribute}` repeats value `{value}` from row {first_row}"
            ),
            DanglingReference { table, row, attribute, value, primary } => write!(
                f,
                "table `{table}` row {row}: `{attribute}` = `{value}` has no matching row in `{primary}`"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidDataset(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

fn key_of(v: &Value) -> Option<String> {
    match v {
        Value::Missing => None,
        Value::Id(s) | Value::Category(s) => Some(s.clone()),
        Value::Number(x) => Some(format!("n:{}", x.to_bits())),
        Value::Timestamp(t) => Some(format!("t:{t}")),
    }
}

fn check_unique(table: &TableData, col: usize, out: &mut Vec<Violation>) {
    let attribute = &table.attributes[col].name;
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (r, row) in table.rows.iter().enumerate() {
        let Some(v) = row.values.get(col) else { continue };
        match key_of(v) {
            None => out.push(Violation::MissingUnique { table: table.name.clone(), row: r, attribute: attribute.clone() }),
            Some(k) => {
                if let Some(&first_row) = seen.get(&k) {
                    out.push(Violation::DuplicateValue {
                        table: table.name.clone(),
                        row: r,
                        first_row,
                        attribute: attribute.clone(),
                        value: v.to_string(),
                    });
                } else {
                    seen.insert(k, r);
                }
            }
        }
    }
}

/// Checks the relational conditions plus every declared per-table invariant.
/// Violations are data: the report is empty iff the dataset is valid.
pub fn validate(dataset: &RelationalDataset) -> ValidationReport {
    let mut out = Vec::new();

    if dataset.tables.len() < 2 {
        out.push(Violation::TooFewTables { count: dataset.tables.len() });
    }
    let mut names = HashSet::new();
    for t in &dataset.tables {
        if !names.insert(t.name.as_str()) {
            out.push(Violation::DuplicateTableName { table: t.name.clone() });
        }
    }

    for table in &dataset.tables {
        let mut attr_names = HashSet::new();
        for a in &table.attributes {
            if !attr_names.insert(a.name.as_str()) {
                out.push(Violation::DuplicateAttributeName { table: table.name.clone(), attribute: a.name.clone() });
            }
        }
        let domains: Vec<Option<HashSet<&str>>> = table
            .attributes
            .iter()
            .map(|a| a.domain.as_ref().map(|d| d.iter().map(String::as_str).collect()))
            .collect();
        for (r, row) in table.rows.iter().enumerate() {
            if row.values.len() != table.attributes.len() {
                out.push(Violation::RowArity {
                    table: table.name.clone(),
                    row: r,
                    expected: table.attributes.len(),
                    found: row.values.len(),
                });
                continue;
            }
            for (c, (v, a)) in row.values.iter().zip(&table.attributes).enumerate() {
                if !v.matches_kind(a.kind) {
                    out.push(Violation::KindMismatch { table: table.name.clone(), row: r, attribute: a.name.clone() });
                } else if let (Value::Category(s), Some(domain)) = (v, &domains[c]) {
                    if !domain.contains(s.as_str()) {
                        out.push(Violation::OutOfDomain {
                            table: table.name.clone(),
                            row: r,
                            attribute: a.name.clone(),
                            value: s.clone(),
                        });
                    }
                }
            }
        }
        for (c, a) in table.attributes.iter().enumerate() {
            if a.unique {
                check_unique(table, c, &mut out);
            }
        }
    }

    if dataset.links.is_empty() {
        out.push(Violation::NoLinks);
    }
    for link in &dataset.links {
        check_link(dataset, link, &mut out);
    }

    ValidationReport { violations: out }
}

fn link_column(dataset: &RelationalDataset, table: &str, attribute: &str, out: &mut Vec<Violation>) -> Option<usize> {
    let Some(t) = dataset.table(table) else {
        out.push(Violation::UnknownLinkTable { table: table.to_string() });
        return None;
    };
    let Some(c) = t.attribute_index(attribute) else {
        out.push(Violation::UnknownLinkAttribute { table: table.to_string(), attribute: attribute.to_string() });
        return None;
    };
    if t.attributes[c].kind != AttributeKind::Identifier {
        out.push(Violation::IdentifierKind { table: table.to_string(), attribute: attribute.to_string() });
        return None;
    }
    Some(c)
}

fn check_link(dataset: &RelationalDataset, link: &Link, out: &mut Vec<Violation>) {
    let pc = link_column(dataset, &link.primary, &link.identifier, out);
    let sc = link_column(dataset, &link.secondary, &link.identifier, out);
    let (Some(pc), Some(sc)) = (pc, sc) else { return };
    let primary = dataset.table(&link.primary).unwrap();
    let secondary = dataset.table(&link.secondary).unwrap();

    // The identifier must be unique in the primary table whether or not the
    // schema declares it; skip the check when it is declared (already done).
    if !primary.attributes[pc].unique {
        check_unique(primary, pc, out);
    }

    let keys: HashSet<&str> = primary
        .rows
        .iter()
        .filter_map(|r| match r.values.get(pc) {
            Some(Value::Id(s)) => Some(s.as_str()),
            _ => None,
        })
        .collect();
    for (r, row) in secondary.rows.iter().enumerate() {
        let found = match row.values.get(sc) {
            Some(Value::Id(s)) => keys.contains(s.as_str()),
            _ => false,
        };
        if !found {
            out.push(Violation::DanglingReference {
                table: secondary.name.clone(),
                row: r,
                attribute: link.identifier.clone(),
                value: row.values.get(sc).map_or_else(|| "<absent>".to_string(), ToString::to_string),
                primary: primary.name.clone(),
            });
        }
    }
}

/// SHA-256 over a canonical description of the schema: table names,
/// attribute names, kinds, unique flags and declared domains, then links.
/// Row data and file locations do not contribute.
pub fn schema_fingerprint(dataset: &RelationalDataset) -> String {
    use core::fmt::Write;
    use sha2::{Digest, Sha256};

    let mut canon = String::new();
    for t in &dataset.tables {
        let _ = write!(canon, "table {}\n", t.name);
        for a in &t.attributes {
            let _ = write!(canon, "  {}:{}:{}", a.name, a.kind, a.unique);
            if let Some(d) = &a.domain {
                for v in d {
                    let _ = write!(canon, ":{}", v);
                }
            }
            canon.push('\n');
        }
    }
    for l in &dataset.links {
        let _ = write!(canon, "link {} {} {}\n", l.primary, l.identifier, l.secondary);
    }
    let digest = Sha256::digest(canon.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Joins a secondary table with its primary table on the identifier.
///
/// One output row per secondary row, in secondary order. Attributes are the
/// primary attributes followed by the secondary attributes without the
/// identifier. Unique flags are dropped since the primary key repeats.
pub fn join_on_identifier(dataset: &RelationalDataset, secondary: &str) -> Result<TableData> {
    let link = dataset
        .links
        .iter()
        .find(|l| l.secondary == secondary)
        .ok_or_else(|| Error::UnknownTable(secondary.to_string()))?;
    validate(dataset).into_result()?;

    let primary = dataset.table(&link.primary).unwrap();
    let sec = dataset.table(secondary).unwrap();
    let pc = primary.attribute_index(&link.identifier).unwrap();
    let sc = sec.attribute_index(&link.identifier).unwrap();

    let mut attributes: Vec<AttributeSpec> = primary.attributes.clone();
    attributes.extend(sec.attributes.iter().enumerate().filter(|(c, _)| *c != sc).map(|(_, a)| a.clone()));
    for a in &mut attributes {
        a.unique = false;
    }

    let index: HashMap<&str, usize> = primary
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match &r.values[pc] {
            Value::Id(s) => Some((s.as_str(), i)),
            _ => None,
        })
        .collect();

    let mut out = TableData::new(format!("{}_{}", primary.name, sec.name), attributes);
    out.rows.reserve(sec.rows.len());
    for row in &sec.rows {
        let Value::Id(key) = &row.values[sc] else { unreachable!("validated") };
        let parent = &primary.rows[index[key.as_str()]];
        let mut values = parent.values.clone();
        values.extend(row.values.iter().enumerate().filter(|(c, _)| *c != sc).map(|(_, v)| v.clone()));
        out.rows.push(Row::new(values));
    }
    Ok(out)
}
