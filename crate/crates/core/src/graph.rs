//! The relational graph: one vertex per row of any table, one undirected edge
//! between a primary row and every secondary row carrying its identifier.
//!
//! Vertices are numbered table by table in dataset order, so sorting by the
//! flat index is the same as sorting by `(table, row)`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::{validate, RelationalDataset, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId {
    pub table: usize,
    pub row: usize,
}

/// Primary and secondary endpoints are flat vertex indices; `link` indexes
/// `RelationalDataset::links`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub primary: usize,
    pub secondary: usize,
    pub link: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalGraph {
    offsets: Vec<usize>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl RelationalGraph {
    /// Builds a graph from row counts and an edge list. Duplicate unordered
    /// pairs are kept once (first occurrence wins).
    pub fn from_parts(table_rows: &[usize], mut edges: Vec<Edge>) -> Self {
        let mut offsets = Vec::with_capacity(table_rows.len() + 1);
        offsets.push(0);
        for &n in table_rows {
            offsets.push(offsets.last().unwrap() + n);
        }
        let n = *offsets.last().unwrap();
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.primary].push(e.secondary);
            adjacency[e.secondary].push(e.primary);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        edges.sort_by_key(|e| (e.primary.min(e.secondary), e.primary.max(e.secondary), e.link));
        edges.dedup_by_key(|e| (e.primary.min(e.secondary), e.primary.max(e.secondary)));
        edges.sort();
        RelationalGraph { offsets, edges, adjacency }
    }

    pub fn vertex_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn table_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn table_rows(&self, table: usize) -> usize {
        self.offsets[table + 1] - self.offsets[table]
    }

    pub fn table_range(&self, table: usize) -> core::ops::Range<usize> {
        self.offsets[table]..self.offsets[table + 1]
    }

    pub fn index(&self, v: VertexId) -> usize {
        self.offsets[v.table] + v.row
    }

    pub fn vertex(&self, index: usize) -> VertexId {
        let table = self.offsets.partition_point(|&o| o <= index) - 1;
        VertexId { table, row: index - self.offsets[table] }
    }

    /// Table of every vertex, in flat order.
    pub fn origin_tables(&self) -> Vec<usize> {
        (0..self.table_count()).flat_map(|t| core::iter::repeat_n(t, self.table_rows(t))).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted neighbour list N(t).
    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn degree(&self, index: usize) -> usize {
        self.adjacency[index].len()
    }

    /// The edge-list attribute: every vertex's neighbours as `(table, row)`
    /// pairs, including an empty list for isolated vertices.
    pub fn edge_list_attribute(&self) -> Vec<Vec<VertexId>> {
        self.adjacency.iter().map(|n| n.iter().map(|&s| self.vertex(s)).collect()).collect()
    }

    /// Primary-side parent of a secondary vertex through `link`.
    pub fn parent(&self, link: usize, secondary: usize) -> Option<usize> {
        self.edges.iter().find(|e| e.link == link && e.secondary == secondary).map(|e| e.primary)
    }

    /// `parents[link][secondary_row]` for every link, as flat primary indices.
    pub fn parent_table(&self, link: usize, secondary_table: usize) -> Vec<Option<usize>> {
        let range = self.table_range(secondary_table);
        let mut out = vec![None; range.len()];
        for e in self.edges.iter().filter(|e| e.link == link) {
            if range.contains(&e.secondary) {
                out[e.secondary - range.start] = Some(e.primary);
            }
        }
        out
    }

    /// Connected components as sorted vertex lists, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &s in &self.adjacency[v] {
                    if !seen[s] {
                        seen[s] = true;
                        queue.push_back(s);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Induced subgraph on a sorted vertex subset, re-indexed locally.
    pub fn local_adjacency(&self, vertices: &[usize]) -> Vec<Vec<usize>> {
        let local: HashMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        vertices
            .iter()
            .map(|&v| self.adjacency[v].iter().filter_map(|s| local.get(s).copied()).collect())
            .collect()
    }
}

/// Hash-joins every link on its identifier attribute.
pub fn build_graph(dataset: &RelationalDataset) -> Result<RelationalGraph> {
    validate(dataset).into_result()?;
    let rows: Vec<usize> = dataset.tables.iter().map(|t| t.len()).collect();
    let mut offsets = vec![0usize];
    for &n in &rows {
        offsets.push(offsets.last().unwrap() + n);
    }

    let mut edges = Vec::new();
    for (l, link) in dataset.links.iter().enumerate() {
        let pi = dataset.table_index(&link.primary).unwrap();
        let si = dataset.table_index(&link.secondary).unwrap();
        let primary = &dataset.tables[pi];
        let secondary = &dataset.tables[si];
        let pc = primary.attribute_index(&link.identifier).unwrap();
        let sc = secondary.attribute_index(&link.identifier).unwrap();

        let index: HashMap<&str, usize> = primary
            .rows
            .iter()
            .enumerate()
            .filter_map(|(r, row)| match &row.values[pc] {
                Value::Id(s) => Some((s.as_str(), r)),
                _ => None,
            })
            .collect();
        for (r, row) in secondary.rows.iter().enumerate() {
            let Value::Id(key) = &row.values[sc] else {
                return Err(Error::InvalidArgument("secondary identifier missing after validation".into()));
            };
            let p = index[key.as_str()];
            edges.push(Edge { primary: offsets[pi] + p, secondary: offsets[si] + r, link: l });
        }
    }
    Ok(RelationalGraph::from_parts(&rows, edges))
}
