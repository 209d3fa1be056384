//! Evaluation of synthetic datasets: model compatibility through a
//! gradient-boosted tree classifier, and a nearest-neighbour privacy score.

mod compat;
mod gbt;
mod metrics;
mod privacy;
mod split;

pub use compat::{mc_value, model_compatibility, model_compatibility_on_split, CompatibilityReport, MetricComparison};
pub use gbt::{fit_classifier, GbtClassifier, GbtConfig};
pub use metrics::{f1_score, macro_roc_auc, roc_auc};
pub use privacy::{
    nn_distances, percentile, privacy_score, privacy_score_datasets, PrivacyReport, PRIVACY_PERCENTILE,
    PRIVACY_THRESHOLD,
};
pub use split::train_test_split;

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::{schema_fingerprint, RelationalDataset};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub target: String,
    /// Secondary table joined with its primary; defaults to the first link.
    pub secondary: Option<String>,
    pub seed: u64,
    pub train_fraction: f64,
    pub classifier: GbtConfig,
}

impl EvalOptions {
    pub fn new(target: impl Into<String>, seed: u64) -> Self {
        EvalOptions {
            target: target.into(),
            secondary: None,
            seed,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            classifier: GbtConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub seed: u64,
    pub train_fraction: f64,
    pub model_compatibility: CompatibilityReport,
    pub privacy: PrivacyReport,
}

pub(crate) fn joined_secondary<'a>(dataset: &'a RelationalDataset, secondary: Option<&'a str>) -> Result<&'a str> {
    match secondary {
        Some(s) => Ok(s),
        None => dataset
            .links
            .first()
            .map(|l| l.secondary.as_str())
            .ok_or_else(|| Error::InvalidArgument("dataset has no links".into())),
    }
}

/// Model compatibility on an 80/20 split of `real` plus the privacy score
/// of `synthetic` against all of `real`.
pub fn evaluate(real: &RelationalDataset, synthetic: &RelationalDataset, options: &EvalOptions) -> Result<EvalReport> {
    let (a, b) = (schema_fingerprint(real), schema_fingerprint(synthetic));
    if a != b {
        return Err(Error::SchemaFingerprintMismatch { model: a, dataset: b });
    }
    let secondary = options.secondary.as_deref();
    let model_compatibility = model_compatibility(
        real,
        synthetic,
        &options.target,
        secondary,
        options.train_fraction,
        options.seed,
        &options.classifier,
    )?;
    let privacy = privacy_score_datasets(real, synthetic, secondary, options.seed)?;
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        seed: options.seed,
        train_fraction: options.train_fraction,
        model_compatibility,
        privacy,
    })
}
