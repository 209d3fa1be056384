//! Synthetic relational data from a graph variational autoencoder.
//!
//! A relational dataset (one primary table, secondary tables linked to it by
//! an identifier attribute) is turned into a graph with one vertex per row.
//! Rows are encoded to numbers, message passing spreads information along the
//! identifier links, and a per-vertex variational autoencoder learns to
//! reproduce the rows. Synthesis samples the latent prior, decodes, passes
//! messages over the real link structure and inverts the encoding.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints
//! and the command line live in the `relsynth` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod matrix;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod relational;
pub mod seed;

pub use error::{Error, Result};
pub use eval::{evaluate, EvalOptions, EvalReport};
pub use graph::{build_graph, RelationalGraph, VertexId};
pub use matrix::Matrix;
pub use model::{synthesize, train_model, GraphVaeModel, LossRecord, TrainConfig};
pub use preprocess::{decode_table, encode_table, merge_tables, split_tables, EncodedTable, MergedTable, TableCodec};
pub use relational::{
    join_on_identifier, validate, AttributeKind, AttributeSpec, Link, RelationalDataset, Row, TableData,
    ValidationReport, Value, Violation,
};
