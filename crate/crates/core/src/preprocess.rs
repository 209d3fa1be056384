//! Invertible preprocessing.
//!
//! [`encode_table`] maps a typed table to a matrix with every entry in
//! `[0, 1]`: numerics and date-times are min-max scaled, categoricals become
//! one-hot spans, and nullable attributes get one extra missingness-indicator
//! column. Identifier attributes are structural and carry no columns.
//!
//! [`merge_tables`] stacks the encoded tables of a dataset into one matrix
//! over the union of all attributes, zero-filling the columns a row's source
//! table does not have, and attaches each row's adjacency list.
//! [`split_tables`] and [`decode_table`] invert both steps.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{RelationalGraph, VertexId};
use crate::matrix::Matrix;
use crate::relational::{AttributeKind, AttributeSpec, Row, TableData, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CodecKind {
    Numeric { min: f64, max: f64 },
    Categorical { categories: Vec<String> },
    DateTime { offset: i64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnCodec {
    pub attribute: String,
    pub kind: CodecKind,
    /// One trailing indicator column, 1 when the value is missing.
    pub nullable: bool,
}

impl ColumnCodec {
    pub fn fit(spec: &AttributeSpec, values: &[&Value]) -> Result<Option<ColumnCodec>> {
        let nullable = values.iter().any(|v| v.is_missing());
        let bad_kind = || Error::KindMismatch { attribute: spec.name.clone() };
        let kind = match spec.kind {
            AttributeKind::Identifier => return Ok(None),
            AttributeKind::Numeric => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for v in values {
                    match v {
                        Value::Number(x) => {
                            min = min.min(*x);
                            max = max.max(*x);
                        }
                        Value::Missing => {}
                        _ => return Err(bad_kind()),
                    }
                }
                if min > max {
                    min = 0.0;
                    max = 0.0;
                }
                CodecKind::Numeric { min, max }
            }
            AttributeKind::DateTime => {
                let mut min = i64::MAX;
                let mut max = i64::MIN;
                for v in values {
                    match v {
                        Value::Timestamp(t) => {
                            min = min.min(*t);
                            max = max.max(*t);
                        }
                        Value::Missing => {}
                        _ => return Err(bad_kind()),
                    }
                }
                if min > max {
                    min = 0;
                    max = 0;
                }
                CodecKind::DateTime { offset: min, scale: (max - min) as f64 }
            }
            AttributeKind::Categorical => {
                let mut categories: Vec<String> = spec.domain.clone().unwrap_or_default();
                let mut seen: HashSet<String> = categories.iter().cloned().collect();
                for v in values {
                    match v {
                        Value::Category(s) => {
                            if seen.insert(s.clone()) {
                                categories.push(s.clone());
                            }
                        }
                        Value::Missing => {}
                        _ => return Err(bad_kind()),
                    }
                }
                CodecKind::Categorical { categories }
            }
        };
        Ok(Some(ColumnCodec { attribute: spec.name.clone(), kind, nullable }))
    }

    /// Columns used by the value itself, without the indicator.
    pub fn value_width(&self) -> usize {
        match &self.kind {
            CodecKind::Categorical { categories } => categories.len(),
            _ => 1,
        }
    }

    pub fn width(&self) -> usize {
        self.value_width() + usize::from(self.nullable)
    }

    pub fn encode_into(&self, value: &Value, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.width());
        out.fill(0.0);
        if value.is_missing() {
            if !self.nullable {
                return Err(Error::UnexpectedMissing { attribute: self.attribute.clone() });
            }
            out[self.value_width()] = 1.0;
            return Ok(());
        }
        match (&self.kind, value) {
            (CodecKind::Numeric { min, max }, Value::Number(x)) => {
                out[0] = if max > min { ((x - min) / (max - min)).clamp(0.0, 1.0) } else { 0.5 };
            }
            (CodecKind::DateTime { offset, scale }, Value::Timestamp(t)) => {
                let raw = (t - offset) as f64;
                out[0] = if *scale > 0.0 { (raw / scale).clamp(0.0, 1.0) } else { 0.5 };
            }
            (CodecKind::Categorical { categories }, Value::Category(s)) => {
                let k = categories.iter().position(|c| c == s).ok_or_else(|| Error::UnseenCategory {
                    attribute: self.attribute.clone(),
                    value: s.clone(),
                })?;
                out[k] = 1.0;
            }
            _ => return Err(Error::KindMismatch { attribute: self.attribute.clone() }),
        }
        Ok(())
    }

    pub fn decode(&self, span: &[f64]) -> Value {
        if self.nullable && span[self.value_width()] >= 0.5 {
            return Value::Missing;
        }
        match &self.kind {
            CodecKind::Numeric { min, max } => {
                if max > min {
                    let x = span[0].clamp(0.0, 1.0);
                    Value::Number((min + x * (max - min)).clamp(*min, *max))
                } else {
                    Value::Number(*min)
                }
            }
            CodecKind::DateTime { offset, scale } => {
                let x = span[0].clamp(0.0, 1.0);
                Value::Timestamp(offset + libm::round(x * scale) as i64)
            }
            CodecKind::Categorical { categories } => {
                if categories.is_empty() {
                    return Value::Missing;
                }
                let mut best = 0;
                for k in 1..categories.len() {
                    if span[k] > span[best] {
                        best = k;
                    }
                }
                Value::Category(categories[best].clone())
            }
        }
    }
}

/// Column range occupied by one attribute in an encoded table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpan {
    pub start: usize,
    pub width: usize,
}

/// How a group of output columns is read back: a bounded scalar or a
/// probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Scalar { column: usize },
    OneHot { start: usize, len: usize },
}

/// Fitted codecs for one table plus the resulting column layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCodec {
    pub table: String,
    pub attributes: Vec<AttributeSpec>,
    pub columns: Vec<Option<ColumnCodec>>,
}

impl TableCodec {
    pub fn fit(table: &TableData) -> Result<TableCodec> {
        let mut columns = Vec::with_capacity(table.attributes.len());
        for (c, spec) in table.attributes.iter().enumerate() {
            let values: Vec<&Value> = table.rows.iter().map(|r| &r.values[c]).collect();
            columns.push(ColumnCodec::fit(spec, &values)?);
        }
        Ok(TableCodec { table: table.name.clone(), attributes: table.attributes.clone(), columns })
    }

    pub fn width(&self) -> usize {
        self.columns.iter().flatten().map(ColumnCodec::width).sum()
    }

    pub fn spans(&self) -> Vec<Option<ColumnSpan>> {
        let mut start = 0;
        self.columns
            .iter()
            .map(|c| {
                c.as_ref().map(|c| {
                    let span = ColumnSpan { start, width: c.width() };
                    start += c.width();
                    span
                })
            })
            .collect()
    }

    pub fn span_of(&self, attribute: &str) -> Option<ColumnSpan> {
        let i = self.attributes.iter().position(|a| a.name == attribute)?;
        self.spans()[i]
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        for (codec, span) in self.columns.iter().zip(self.spans()) {
            let (Some(codec), Some(span)) = (codec, span) else { continue };
            match codec.kind {
                CodecKind::Categorical { ref categories } => {
                    if !categories.is_empty() {
                        out.push(Segment::OneHot { start: span.start, len: categories.len() });
                    }
                }
                _ => out.push(Segment::Scalar { column: span.start }),
            }
            if codec.nullable {
                out.push(Segment::Scalar { column: span.start + codec.value_width() });
            }
        }
        out
    }

    pub fn encode(&self, table: &TableData) -> Result<EncodedTable> {
        if table.attributes.len() != self.attributes.len() {
            return Err(Error::ShapeMismatch(format!(
                "table `{}` has {} attributes, codec expects {}",
                table.name,
                table.attributes.len(),
                self.attributes.len()
            )));
        }
        let spans = self.spans();
        let mut matrix = Matrix::zeros(table.rows.len(), self.width());
        for (r, row) in table.rows.iter().enumerate() {
            let out = matrix.row_mut(r);
            for ((codec, span), value) in self.columns.iter().zip(&spans).zip(&row.values) {
                if let (Some(codec), Some(span)) = (codec, span) {
                    codec.encode_into(value, &mut out[span.start..span.start + span.width])?;
                }
            }
        }
        Ok(EncodedTable { table: table.name.clone(), attributes: self.attributes.clone(), spans, matrix })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedTable {
    pub table: String,
    pub attributes: Vec<AttributeSpec>,
    /// Per attribute; `None` for identifiers.
    pub spans: Vec<Option<ColumnSpan>>,
    pub matrix: Matrix,
}

impl EncodedTable {
    pub fn width(&self) -> usize {
        self.matrix.cols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }
}

/// Fits codecs on `table` and encodes it.
pub fn encode_table(table: &TableData) -> Result<(EncodedTable, TableCodec)> {
    let codec = TableCodec::fit(table)?;
    let encoded = codec.encode(table)?;
    Ok((encoded, codec))
}

/// Inverse of [`encode_table`]. Identifier attributes come back `Missing`;
/// they are restored from graph topology by the caller.
pub fn decode_table(encoded: &EncodedTable, codec: &TableCodec) -> Result<TableData> {
    if encoded.width() != codec.width() {
        return Err(Error::ShapeMismatch(format!(
            "encoded table `{}` has {} columns, codec expects {}",
            encoded.table,
            encoded.width(),
            codec.width()
        )));
    }
    let spans = codec.spans();
    let mut out = TableData::new(codec.table.clone(), codec.attributes.clone());
    out.rows.reserve(encoded.rows());
    for r in 0..encoded.rows() {
        let row = encoded.matrix.row(r);
        let values = codec
            .columns
            .iter()
            .zip(&spans)
            .map(|(c, s)| match (c, s) {
                (Some(c), Some(s)) => c.decode(&row[s.start..s.start + s.width]),
                _ => Value::Missing,
            })
            .collect();
        out.rows.push(Row::new(values));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergedAttribute {
    Feature { table: String, attribute: String, span: ColumnSpan },
    /// Shared by name across tables; carries no columns.
    Identifier { name: String },
    /// The per-row adjacency list.
    EdgeList,
}

/// Column layout of one source table inside the merged matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableBlock {
    pub table: String,
    pub attributes: Vec<AttributeSpec>,
    pub spans: Vec<Option<ColumnSpan>>,
    pub start: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTable {
    pub matrix: Matrix,
    pub origins: Vec<VertexId>,
    pub adjacency: Vec<Vec<usize>>,
    pub attributes: Vec<MergedAttribute>,
    pub blocks: Vec<TableBlock>,
}

impl MergedTable {
    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }
}

/// `Σ|A(T)| − |D| + 2` when every table shares exactly one identifier.
pub fn expected_attribute_count(attribute_counts: &[usize]) -> usize {
    attribute_counts.iter().sum::<usize>() + 2 - attribute_counts.len()
}

/// Stacks encoded tables (dataset order) into one matrix. Row `i` of the
/// result is graph vertex `i`.
pub fn merge_tables(encoded: &[EncodedTable], graph: &RelationalGraph) -> Result<MergedTable> {
    if graph.table_count() != encoded.len() {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} tables, {} encoded tables given",
            graph.table_count(),
            encoded.len()
        )));
    }
    let mut blocks = Vec::with_capacity(encoded.len());
    let mut attributes = Vec::new();
    let mut identifiers: HashSet<String> = HashSet::new();
    let mut start = 0;
    for (t, e) in encoded.iter().enumerate() {
        if graph.table_rows(t) != e.rows() {
            return Err(Error::GraphRowMismatch { table: e.table.clone(), graph: graph.table_rows(t), rows: e.rows() });
        }
        for (a, span) in e.attributes.iter().zip(&e.spans) {
            match span {
                Some(s) => attributes.push(MergedAttribute::Feature {
                    table: e.table.clone(),
                    attribute: a.name.clone(),
                    span: ColumnSpan { start: start + s.start, width: s.width },
                }),
                None => {
                    if identifiers.insert(a.name.clone()) {
                        attributes.push(MergedAttribute::Identifier { name: a.name.clone() });
                    }
                }
            }
        }
        blocks.push(TableBlock {
            table: e.table.clone(),
            attributes: e.attributes.clone(),
            spans: e.spans.clone(),
            start,
            width: e.width(),
        });
        start += e.width();
    }
    attributes.push(MergedAttribute::EdgeList);

    let mut matrix = Matrix::zeros(graph.vertex_count(), start);
    let mut origins = Vec::with_capacity(graph.vertex_count());
    for (t, e) in encoded.iter().enumerate() {
        let b = &blocks[t];
        for r in 0..e.rows() {
            let i = graph.index(VertexId { table: t, row: r });
            matrix.row_mut(i)[b.start..b.start + b.width].copy_from_slice(e.matrix.row(r));
            origins.push(VertexId { table: t, row: r });
        }
    }
    Ok(MergedTable { matrix, origins, adjacency: graph.adjacency().to_vec(), attributes, blocks })
}

/// Inverse of [`merge_tables`]: every row goes back to its origin table and
/// keeps only that table's columns.
pub fn split_tables(merged: &MergedTable) -> Result<Vec<EncodedTable>> {
    if merged.origins.len() != merged.matrix.rows() {
        return Err(Error::MissingOriginTag { rows: merged.matrix.rows(), origins: merged.origins.len() });
    }
    let mut counts = vec![0usize; merged.blocks.len()];
    for o in &merged.origins {
        let c = counts
            .get_mut(o.table)
            .ok_or_else(|| Error::ShapeMismatch(format!("origin table {} out of range", o.table)))?;
        *c = (*c).max(o.row + 1);
    }
    let mut out: Vec<EncodedTable> = merged
        .blocks
        .iter()
        .zip(&counts)
        .map(|(b, &n)| EncodedTable {
            table: b.table.clone(),
            attributes: b.attributes.clone(),
            spans: b.spans.clone(),
            matrix: Matrix::zeros(n, b.width),
        })
        .collect();
    for (i, o) in merged.origins.iter().enumerate() {
        let b = &merged.blocks[o.table];
        out[o.table].matrix.row_mut(o.row).copy_from_slice(&merged.matrix.row(i)[b.start..b.start + b.width]);
    }
    Ok(out)
}

/// Codecs for all tables of a dataset, in dataset order.
pub fn fit_codecs(tables: &[TableData]) -> Result<Vec<TableCodec>> {
    tables.iter().map(TableCodec::fit).collect()
}

pub fn encode_tables(codecs: &[TableCodec], tables: &[TableData]) -> Result<Vec<EncodedTable>> {
    if codecs.len() != tables.len() {
        return Err(Error::ShapeMismatch(format!("{} codecs for {} tables", codecs.len(), tables.len())));
    }
    codecs.iter().zip(tables).map(|(c, t)| c.encode(t)).collect()
}
