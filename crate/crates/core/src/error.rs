use alloc::string::String;

use thiserror::Error;

use crate::relational::ValidationReport;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown attribute `{attribute}` in table `{table}`")]
    UnknownAttribute { table: String, attribute: String },
    #[error("dataset is not relational:\n{0}")]
    InvalidDataset(ValidationReport),
    #[error("value `{value}` of attribute `{attribute}` is not in the fitted category list")]
    UnseenCategory { attribute: String, value: String },
    #[error("attribute `{attribute}` has a value of the wrong kind")]
    KindMismatch { attribute: String },
    #[error("attribute `{attribute}` is missing but its codec was fitted without missing values")]
    UnexpectedMissing { attribute: String },
    #[error("graph has {graph} vertices for table `{table}` but the encoded table has {rows} rows")]
    GraphRowMismatch { table: String, graph: usize, rows: usize },
    #[error("merged table has {rows} rows but {origins} origin tags")]
    MissingOriginTag { rows: usize, origins: usize },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("schema fingerprint mismatch: model {model}, dataset {dataset}")]
    SchemaFingerprintMismatch { model: String, dataset: String },
    #[error("target attribute `{0}` is not categorical")]
    TargetNotCategorical(String),
    #[error("table `{0}` has no usable rows")]
    EmptyTable(String),
    #[error("labels contain a single class; ROC AUC is undefined")]
    SingleClassLabels,
    #[error("{0}")]
    InvalidArgument(String),
}
