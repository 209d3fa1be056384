use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Area under the ROC curve for binary labels, with tied scores sharing
/// their average rank.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(alloc::format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// ROC AUC of class probabilities. Two classes use the class-1 column
/// directly; more classes average one-vs-rest AUCs over every class that
/// has both positive and negative examples.
pub fn macro_roc_auc(probs: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<f64> {
    if n_classes == 2 {
        let s: Vec<f64> = probs.iter().map(|p| p[1]).collect();
        let l: Vec<bool> = labels.iter().map(|&y| y == 1).collect();
        return roc_auc(&s, &l);
    }
    let mut total = 0.0;
    let mut counted = 0;
    for k in 0..n_classes {
        let s: Vec<f64> = probs.iter().map(|p| p[k]).collect();
        let l: Vec<bool> = labels.iter().map(|&y| y == k).collect();
        match roc_auc(&s, &l) {
            Ok(a) => {
                total += a;
                counted += 1;
            }
            Err(Error::SingleClassLabels) => {}
            Err(e) => return Err(e),
        }
    }
    if counted == 0 {
        return Err(Error::SingleClassLabels);
    }
    Ok(total / counted as f64)
}

fn class_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// F1 of class 1 for two classes; otherwise the macro average over classes
/// that occur in the labels or the predictions.
pub fn f1_score(predictions: &[usize], labels: &[usize], n_classes: usize) -> f64 {
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p == y {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[y] += 1;
        }
    }
    if n_classes == 2 {
        return class_f1(tp[1], fp[1], fn_[1]);
    }
    let active: Vec<usize> = (0..n_classes).filter(|&k| tp[k] + fp[k] + fn_[k] > 0).collect();
    if active.is_empty() {
        return 0.0;
    }
    active.iter().map(|&k| class_f1(tp[k], fp[k], fn_[k])).sum::<f64>() / active.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_worked_example() {
        let s = [0.9, 0.8, 0.3, 0.2];
        let l = [true, false, true, false];
        assert_eq!(pairwise_auc(&s, &l), 0.75);
        assert!((roc_auc(&s, &l).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn auc_matches_pair_counting_with_ties() {
        let s = [0.5, 0.5, 0.1, 0.7, 0.5, 0.1, 0.9];
        let l = [true, false, false, true, true, true, false];
        assert!((roc_auc(&s, &l).unwrap() - pairwise_auc(&s, &l)).abs() < 1e-12);
        let constant = [0.3; 4];
        assert_eq!(roc_auc(&constant, &[true, false, true, false]).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_is_an_error() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClassLabels)));
    }

    #[test]
    fn macro_auc_skips_absent_classes() {
        let probs = [vec![0.8, 0.1, 0.1], vec![0.2, 0.7, 0.1], vec![0.6, 0.3, 0.1]];
        let a = macro_roc_auc(&probs, &[0, 1, 0], 3).unwrap();
        assert_eq!(a, 1.0);
    }

    #[test]
    fn f1_half() {
        // tp = 1, fp = 1, fn = 1: precision = recall = 0.5.
        assert_eq!(f1_score(&[1, 1, 0, 0], &[1, 0, 1, 0], 2), 0.5);
        assert_eq!(f1_score(&[0, 0], &[0, 0], 2), 0.0);
        assert_eq!(f1_score(&[0, 1, 2], &[0, 1, 2], 3), 1.0);
    }
}
