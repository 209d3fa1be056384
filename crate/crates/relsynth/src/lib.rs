//! Files and command line for synthetic relational data.
//!
//! Loads datasets from CSV files described by a JSON schema, saves and
//! reloads trained models, writes synthetic datasets and evaluation
//! reports, and provides the `relsynth` binary. The modelling itself lives
//! in [`relsynth_core`].

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod report;
pub mod schema;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use error::{Error, Result};
pub use schema::{load_dataset, write_dataset, SchemaConfig};
