//! From-scratch classifiers: logistic regression, CART, random forest, and
//! second-order (Newton) boosted tree ensembles, plus Platt calibration and
//! JSON model persistence.

mod cart;
mod forest;
mod gbdt;
mod logistic;
mod persist;
mod platt;

pub use cart::{train_tree, DecisionTreeModel, TreeConfig};
pub use forest::{train_forest, ForestConfig, ForestModel};
pub use gbdt::{train_gbdt, BoostedEnsemble, GbdtConfig, Growth, Objective};
pub use logistic::{train_logistic, LinearModel, LogisticConfig};
pub use persist::{load_model, model_to_json, model_from_json, save_model, MODEL_FORMAT_VERSION};
pub use platt::{apply_platt, fit_platt, PlattCalibrator};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use serde::{Deserialize, Serialize};

/// Which label a model is trained against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Binary,
    Severity,
}

impl TargetKind {
    pub fn n_classes(self) -> usize {
        match self {
            TargetKind::Binary => 2,
            TargetKind::Severity => 3,
        }
    }

    pub fn labels(self, matrix: &FeatureMatrix) -> &[u8] {
        match self {
            TargetKind::Binary => &matrix.target_binary,
            TargetKind::Severity => &matrix.target_severity,
        }
    }
}

/// One node of a trained tree. `cover` is the training-weight mass that
/// reached the node: row counts for CART/forest trees, hessian sums for
/// boosted trees. Internal covers equal the sum of their children exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
    },
    Leaf {
        value: Vec<f64>,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Internal { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// Index-based tree; node 0 is the root. Routing: `x[feature] < threshold`
/// goes left, otherwise right.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if row[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                leaf => return leaf,
            }
        }
    }

    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        match self.leaf_for(row) {
            Node::Leaf { value, .. } => value,
            Node::Internal { .. } => unreachable!(),
        }
    }

    /// Distinct feature indices used by splits.
    pub fn split_features(&self) -> std::collections::BTreeSet<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        fn depth(tree: &Tree, idx: usize) -> usize {
            match &tree.nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => {
                    1 + depth(tree, *left).max(depth(tree, *right))
                }
            }
        }
        depth(self, 0)
    }

    /// Cover-weighted expected leaf value for one output dimension.
    pub fn expected_value(&self, output: usize) -> f64 {
        let root_cover = self.nodes[0].cover();
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { value, cover } => Some(value[output] * cover / root_cover),
                Node::Internal { .. } => None,
            })
            .sum()
    }

    /// Verified before explanation: positive covers, children summing to
    /// their parent, indices in range.
    pub fn check_covers(&self) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            if node.cover() <= 0.0 {
                return Err(Error::Model(format!(
                    "zero-cover node {i}: cover {}",
                    node.cover()
                )));
            }
            if let Node::Internal {
                left,
                right,
                cover,
                ..
            } = node
            {
                if *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return Err(Error::Model(format!("node {i}: child index out of range")));
                }
                let child_sum = self.nodes[*left].cover() + self.nodes[*right].cover();
                if child_sum != *cover {
                    return Err(Error::Model(format!(
                        "node {i}: cover {cover} != children sum {child_sum}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_feature_count(expected: usize, matrix: &FeatureMatrix) -> Result<()> {
    if matrix.n_cols() != expected {
        return Err(Error::Shape(format!(
            "model expects {expected} features but rows have {}",
            matrix.n_cols()
        )));
    }
    Ok(())
}

pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Any trained classifier, unified for evaluation, explanation, persistence,
/// and the CLI stages.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Logistic(LinearModel),
    Tree(DecisionTreeModel),
    Forest(ForestModel),
    Boosted(BoostedEnsemble),
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Logistic(_) => "logistic",
            TrainedModel::Tree(_) => "tree",
            TrainedModel::Forest(_) => "forest",
            TrainedModel::Boosted(_) => "boosted",
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            TrainedModel::Logistic(_) => 2,
            TrainedModel::Tree(m) => m.n_classes,
            TrainedModel::Forest(m) => m.n_classes,
            TrainedModel::Boosted(m) => m.n_classes,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            TrainedModel::Logistic(m) => &m.feature_names,
            TrainedModel::Tree(m) => &m.feature_names,
            TrainedModel::Forest(m) => &m.feature_names,
            TrainedModel::Boosted(m) => &m.feature_names,
        }
    }

    /// Per-row class-probability vectors.
    pub fn probabilities(&self, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        check_feature_count(self.feature_names().len(), matrix)?;
        let rows = (0..matrix.n_rows()).map(|i| matrix.row(i));
        match self {
            TrainedModel::Logistic(m) => Ok(rows
                .map(|r| {
                    let p = sigmoid(m.margin(r));
                    vec![1.0 - p, p]
                })
                .collect()),
            TrainedModel::Tree(m) => Ok(rows.map(|r| m.tree.leaf_value(r).to_vec()).collect()),
            TrainedModel::Forest(m) => Ok(rows.map(|r| m.probability(r)).collect()),
            TrainedModel::Boosted(m) => Ok(rows.map(|r| m.probability(r)).collect()),
        }
    }

    /// Native binary ranking score: log-odds margin for logistic and boosted
    /// models, positive-class frequency for tree and forest models.
    pub fn binary_score(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        if self.n_classes() != 2 {
            return Err(Error::Model(format!(
                "binary score undefined for a {}-class model",
                self.n_classes()
            )));
        }
        check_feature_count(self.feature_names().len(), matrix)?;
        let rows = (0..matrix.n_rows()).map(|i| matrix.row(i));
        match self {
            TrainedModel::Logistic(m) => Ok(rows.map(|r| m.margin(r)).collect()),
            TrainedModel::Boosted(m) => Ok(rows.map(|r| m.margins(r)[0]).collect()),
            TrainedModel::Tree(m) => Ok(rows.map(|r| m.tree.leaf_value(r)[1]).collect()),
            TrainedModel::Forest(m) => Ok(rows.map(|r| m.probability(r)[1]).collect()),
        }
    }

    /// Argmax class per row; ties break toward the lower class index.
    pub fn predict_class(&self, matrix: &FeatureMatrix) -> Result<Vec<u8>> {
        Ok(self
            .probabilities(matrix)?
            .into_iter()
            .map(|p| argmax_low_tie(&p))
            .collect())
    }
}

pub(crate) fn argmax_low_tie(scores: &[f64]) -> u8 {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_toward_lower_index() {
        assert_eq!(argmax_low_tie(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax_low_tie(&[0.1, 0.5, 0.4]), 1);
        assert_eq!(argmax_low_tie(&[1.0 / 3.0; 3]), 0);
    }

    #[test]
    fn softmax_of_equal_margins_is_uniform() {
        let mut s = [1.7, 1.7, 1.7];
        softmax_in_place(&mut s);
        for v in s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
