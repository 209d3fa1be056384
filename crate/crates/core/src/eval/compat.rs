use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::gbt::{features_and_labels, GbtClassifier, GbtConfig};
use super::joined_secondary;
use super::metrics::{f1_score, macro_roc_auc};
use super::split::train_test_split;
use crate::error::Result;
use crate::preprocess::TableCodec;
use crate::relational::{join_on_identifier, RelationalDataset, TableData};

/// `|1 - real / synthetic|`, undefined when the synthetic score is zero.
pub fn mc_value(real: f64, synthetic: f64) -> Option<f64> {
    if synthetic == 0.0 {
        None
    } else {
        Some(libm::fabs(1.0 - real / synthetic))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    /// Score of the classifier trained on real data.
    pub real: f64,
    /// Score of the classifier trained on synthetic data.
    pub synthetic: f64,
    /// `None` when the synthetic score is zero.
    pub mc: Option<f64>,
    /// Why `mc` is undefined, if it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MetricComparison {
    fn new(real: f64, synthetic: f64) -> Self {
        let mc = mc_value(real, synthetic);
        let note = mc.is_none().then(|| "synthetic-trained score is zero, ratio undefined".into());
        MetricComparison { real, synthetic, mc, note }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub target: String,
    pub joined_table: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub synthetic_rows: usize,
    pub roc_auc: MetricComparison,
    pub f1: MetricComparison,
}

fn concat(a: &TableData, b: &TableData) -> TableData {
    let mut out = a.clone();
    out.rows.extend(b.rows.iter().cloned());
    out
}

/// Compares a classifier trained on `train` with one trained on
/// `synthetic`, both scored on `test`. Every dataset is joined on
/// `secondary` and encoded with codecs fitted on the real rows only.
pub fn model_compatibility_on_split(
    train: &RelationalDataset,
    test: &RelationalDataset,
    synthetic: &RelationalDataset,
    target: &str,
    secondary: Option<&str>,
    config: &GbtConfig,
) -> Result<CompatibilityReport> {
    let secondary = joined_secondary(train, secondary)?;
    let train_j = join_on_identifier(train, secondary)?;
    let test_j = join_on_identifier(test, secondary)?;
    let synth_j = join_on_identifier(synthetic, secondary)?;
    let codec = TableCodec::fit(&concat(&train_j, &test_j))?;

    let (x_train, y_train, classes) = features_and_labels(&train_j, &codec, target)?;
    let (x_test, y_test, _) = features_and_labels(&test_j, &codec, target)?;
    let (x_synth, y_synth, _) = features_and_labels(&synth_j, &codec, target)?;
    let n = classes.len();
    let m = GbtClassifier::fit(&x_train, &y_train, n, config)?;
    let m_hat = GbtClassifier::fit(&x_synth, &y_synth, n, config)?;

    let score = |clf: &GbtClassifier| -> Result<(f64, f64)> {
        let probs = clf.predict_proba(&x_test);
        let pred: Vec<usize> = probs.iter().map(|p| super::gbt::argmax(p)).collect();
        Ok((macro_roc_auc(&probs, &y_test, n)?, f1_score(&pred, &y_test, n)))
    };
    let (auc, f1) = score(&m)?;
    let (auc_hat, f1_hat) = score(&m_hat)?;
    Ok(CompatibilityReport {
        target: target.into(),
        joined_table: train_j.name.clone(),
        train_rows: y_train.len(),
        test_rows: y_test.len(),
        synthetic_rows: y_synth.len(),
        roc_auc: MetricComparison::new(auc, auc_hat),
        f1: MetricComparison::new(f1, f1_hat),
    })
}

/// Splits `real` into training and test folds (seeded, `train_fraction` of
/// the primary rows for training) and runs
/// [`model_compatibility_on_split`].
pub fn model_compatibility(
    real: &RelationalDataset,
    synthetic: &RelationalDataset,
    target: &str,
    secondary: Option<&str>,
    train_fraction: f64,
    seed: u64,
    config: &GbtConfig,
) -> Result<CompatibilityReport> {
    let (train, test) = train_test_split(real, train_fraction, seed)?;
    model_compatibility_on_split(&train, &test, synthetic, target, secondary, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::relational::{AttributeSpec, Value};
    use crate::seed::rng;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::Rng;

    fn labelled(n: usize, seed: u64) -> RelationalDataset {
        let mut r = rng(seed);
        let mut p = TableData::new(
            "p",
            vec![
                AttributeSpec::identifier("id").unique(),
                AttributeSpec::categorical("label").with_domain(vec!["no".into(), "yes".into()]),
            ],
        );
        let mut s = TableData::new("s", vec![AttributeSpec::identifier("id"), AttributeSpec::numeric("x")]);
        for i in 0..n {
            let yes = i % 2 == 0;
            p.push(vec![Value::id(i.to_string()), Value::category(if yes { "yes" } else { "no" })]);
            for _ in 0..2 {
                let x = if yes { 1.0 } else { 0.0 } + r.random_range(-0.8..0.8);
                s.push(vec![Value::id(i.to_string()), Value::Number(x)]);
            }
        }
        RelationalDataset::single_primary(vec![p, s], "p", "id")
    }

    #[test]
    fn mc_worked_example() {
        assert!((mc_value(0.8, 0.9).unwrap() - 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(mc_value(0.8, 0.0), None);
    }

    #[test]
    fn identical_training_data_gives_zero() {
        let d = labelled(80, 1);
        let (train, test) = train_test_split(&d, 0.8, 4).unwrap();
        let r = model_compatibility_on_split(&train, &test, &train, "label", None, &GbtConfig::default()).unwrap();
        assert_eq!(r.roc_auc.mc, Some(0.0));
        assert_eq!(r.f1.mc, Some(0.0));
        assert!(r.roc_auc.real > 0.8);
    }

    #[test]
    fn numeric_target_is_rejected() {
        let d = labelled(20, 2);
        let err = model_compatibility(&d, &d, "x", None, 0.8, 0, &GbtConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TargetNotCategorical(_)));
    }
}
