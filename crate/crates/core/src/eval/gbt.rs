//! Multi-class gradient-boosted regression trees with a softmax log-loss.
//!
//! One tree per class and round; leaves take a single Newton step
//! `-G / (H + lambda)`. Splits are exact greedy over sorted feature values.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::{CodecKind, TableCodec};
use crate::relational::TableData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig { trees: 100, max_depth: 3, learning_rate: 0.1, lambda: 1.0, min_child_weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a GbtConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        Node::Leaf(-g / (h + self.config.lambda))
    }

    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let lambda = self.config.lambda;
        let mcw = self.config.min_child_weight;
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        let parent = g * g / (h + lambda);
        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = 1e-12;
        let mut sorted = idx.to_vec();
        for f in 0..self.x.cols() {
            sorted.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for w in 0..sorted.len() - 1 {
                let i = sorted[w];
                gl += self.grad[i];
                hl += self.hess[i];
                let (a, b) = (self.x[(i, f)], self.x[(sorted[w + 1], f)]);
                if a == b {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < mcw || hr < mcw {
                    continue;
                }
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((f, 0.5 * (a + b)));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let split = if depth < self.config.max_depth && idx.len() > 1 { self.best_split(idx) } else { None };
        match split {
            None => self.nodes[at] = self.leaf(idx),
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[(i, feature)] < threshold);
                let left = self.grow(&l, depth + 1);
                let right = self.grow(&r, depth + 1);
                self.nodes[at] = Node::Split { feature, threshold, left, right };
            }
        }
        at
    }
}

/// A fitted classifier over `n_classes` labels. Classes absent from the
/// training labels always receive probability zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GbtClassifier {
    n_classes: usize,
    present: Vec<usize>,
    base: Vec<f64>,
    rounds: Vec<Vec<Tree>>,
    learning_rate: f64,
}

fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - m);
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

impl GbtClassifier {
    pub fn fit(x: &Matrix, labels: &[usize], n_classes: usize, config: &GbtConfig) -> Result<GbtClassifier> {
        if x.rows() == 0 {
            return Err(Error::EmptyTable("classifier training data".into()));
        }
        if labels.len() != x.rows() || labels.iter().any(|&y| y >= n_classes) {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} labels for {} rows over {} classes",
                labels.len(),
                x.rows(),
                n_classes
            )));
        }
        let n = x.rows();
        let mut counts = vec![0usize; n_classes];
        for &y in labels {
            counts[y] += 1;
        }
        let present: Vec<usize> = (0..n_classes).filter(|&k| counts[k] > 0).collect();
        let base: Vec<f64> = present.iter().map(|&k| libm::log(counts[k] as f64 / n as f64)).collect();
        let mut clf =
            GbtClassifier { n_classes, present, base, rounds: Vec::new(), learning_rate: config.learning_rate };
        if clf.present.len() < 2 {
            return Ok(clf);
        }

        let k = clf.present.len();
        let onehot: Vec<usize> = labels.iter().map(|y| clf.present.iter().position(|p| p == y).unwrap()).collect();
        let mut scores: Vec<f64> = (0..n).flat_map(|_| clf.base.iter().copied()).collect();
        let all: Vec<usize> = (0..n).collect();
        let mut probs = scores.clone();
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for _ in 0..config.trees {
            probs.copy_from_slice(&scores);
            for row in probs.chunks_mut(k) {
                softmax_in_place(row);
            }
            let mut round = Vec::with_capacity(k);
            for c in 0..k {
                for i in 0..n {
                    let p = probs[i * k + c];
                    grad[i] = p - if onehot[i] == c { 1.0 } else { 0.0 };
                    hess[i] = (p * (1.0 - p)).max(1e-16);
                }
                let mut b = Builder { x, grad: &grad, hess: &hess, config, nodes: Vec::new() };
                b.grow(&all, 0);
                let tree = Tree { nodes: b.nodes };
                for i in 0..n {
                    scores[i * k + c] += config.learning_rate * tree.predict(x.row(i));
                }
                round.push(tree);
            }
            clf.rounds.push(round);
        }
        Ok(clf)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Class probabilities for every row, `n_classes` entries each.
    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let mut s = self.base.clone();
                for round in &self.rounds {
                    for (c, tree) in round.iter().enumerate() {
                        s[c] += self.learning_rate * tree.predict(row);
                    }
                }
                softmax_in_place(&mut s);
                let mut out = vec![0.0; self.n_classes];
                for (&k, p) in self.present.iter().zip(s) {
                    out[k] = p;
                }
                out
            })
            .collect()
    }

    /// Most probable class; ties go to the lower index.
    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        self.predict_proba(x).iter().map(|p| argmax(p)).collect()
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..p.len() {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

/// Encodes `table` with `codec` and separates the categorical `target` from
/// the features. Rows with a missing target are dropped. Returns the feature
/// matrix, the label indices and the class names.
pub fn features_and_labels(
    table: &TableData,
    codec: &TableCodec,
    target: &str,
) -> Result<(Matrix, Vec<usize>, Vec<String>)> {
    let col = codec.attributes.iter().position(|a| a.name == target).ok_or_else(|| Error::UnknownAttribute {
        table: codec.table.clone(),
        attribute: target.into(),
    })?;
    let Some(target_codec) = &codec.columns[col] else {
        return Err(Error::TargetNotCategorical(target.into()));
    };
    let CodecKind::Categorical { categories } = &target_codec.kind else {
        return Err(Error::TargetNotCategorical(target.into()));
    };
    let span = codec.spans()[col].unwrap();
    let encoded = codec.encode(table)?;
    let n_classes = categories.len();
    let width = encoded.width() - span.width;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        if row.values[col].is_missing() {
            continue;
        }
        let enc = encoded.matrix.row(r);
        labels.push(argmax(&enc[span.start..span.start + n_classes]));
        data.extend_from_slice(&enc[..span.start]);
        data.extend_from_slice(&enc[span.start + span.width..]);
    }
    Ok((Matrix::from_vec(labels.len(), width, data), labels, categories.clone()))
}

/// Fits a classifier for `target` on `table` encoded with `codec`.
pub fn fit_classifier(table: &TableData, codec: &TableCodec, target: &str, config: &GbtConfig) -> Result<GbtClassifier> {
    let (x, y, classes) = features_and_labels(table, codec, target)?;
    GbtClassifier::fit(&x, &y, classes.len(), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use rand::Rng;

    fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
        pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_data_is_learned() {
        let mut r = rng(1);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..300 {
            let class = i % 3;
            data.push(class as f64 + r.random_range(0.0..0.8));
            data.push(r.random::<f64>());
            y.push(class);
        }
        let x = Matrix::from_vec(300, 2, data);
        let clf = GbtClassifier::fit(&x, &y, 3, &GbtConfig::default()).unwrap();
        assert!(accuracy(&clf.predict(&x), &y) >= 0.99);
        for p in clf.predict_proba(&x) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_predicts_certainty() {
        let x = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let clf = GbtClassifier::fit(&x, &[1, 1, 1, 1], 2, &GbtConfig::default()).unwrap();
        assert_eq!(clf.predict_proba(&x)[2], [0.0, 1.0]);
    }

    #[test]
    fn zero_trees_give_priors() {
        let x = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let config = GbtConfig { trees: 0, ..GbtConfig::default() };
        let clf = GbtClassifier::fit(&x, &[0, 1, 1, 1], 2, &config).unwrap();
        let p = &clf.predict_proba(&x)[0];
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn one_split_stump_matches_hand_computation() {
        // Two points per class, one round of depth one: the leaves take the
        // Newton step from the uniform prior, -G/(H+1) with g = 0.5 - y and
        // h = 0.25 per point, so each leaf is (2 * 0.5) / (0.5 + 1) = 2/3 in
        // magnitude.
        let x = Matrix::from_vec(4, 1, vec![0.0, 0.1, 0.9, 1.0]);
        let config = GbtConfig { trees: 1, max_depth: 1, learning_rate: 1.0, lambda: 1.0, min_child_weight: 0.0 };
        let clf = GbtClassifier::fit(&x, &[0, 0, 1, 1], 2, &config).unwrap();
        let p = clf.predict_proba(&x);
        let expected = 1.0 / (1.0 + libm::exp(-4.0 / 3.0));
        assert!((p[3][1] - expected).abs() < 1e-12, "{:?}", p);
        assert!((p[0][0] - expected).abs() < 1e-12);
    }

    #[test]
    fn min_child_weight_blocks_small_leaves() {
        let x = Matrix::from_vec(4, 1, vec![0.0, 0.1, 0.9, 1.0]);
        let config = GbtConfig { trees: 1, max_depth: 1, learning_rate: 1.0, lambda: 1.0, min_child_weight: 1.0 };
        let clf = GbtClassifier::fit(&x, &[0, 0, 1, 1], 2, &config).unwrap();
        assert_eq!(clf.predict_proba(&x)[0], [0.5, 0.5]);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let x = Matrix::zeros(0, 2);
        assert!(matches!(GbtClassifier::fit(&x, &[], 2, &GbtConfig::default()), Err(Error::EmptyTable(_))));
    }
}
