//! CART classification trees: greedy best-split minimizing weighted Gini
//! impurity over midpoint thresholds.

use super::{Node, TargetKind, Tree};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: u32,
    pub min_samples_split: usize,
    pub min_gain: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 6,
            min_samples_split: 10,
            min_gain: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeModel {
    pub tree: Tree,
    pub n_classes: usize,
    pub target: TargetKind,
    pub feature_names: Vec<String>,
    pub config: TreeConfig,
}

/// Gini impurity of a class-count vector.
pub(crate) fn gini(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

pub(crate) struct CandidateSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best Gini split over the candidate features, scanned in ascending feature
/// index with strictly-improving gain, so ties resolve to the lowest feature
/// index and then the lowest threshold.
fn best_gini_split(
    matrix: &FeatureMatrix,
    labels: &[u8],
    n_classes: usize,
    rows: &[usize],
    candidates: &[usize],
) -> Option<CandidateSplit> {
    let mut parent_counts = vec![0usize; n_classes];
    for &i in rows {
        parent_counts[labels[i] as usize] += 1;
    }
    let n = rows.len() as f64;
    let parent_impurity = gini(&parent_counts);

    let mut best: Option<CandidateSplit> = None;
    let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
    for &feature in candidates {
        sorted.clear();
        sorted.extend(
            rows.iter()
                .map(|&i| (matrix.row(i)[feature], labels[i])),
        );
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

        let mut left_counts = vec![0usize; n_classes];
        let mut left_n = 0usize;
        for i in 0..sorted.len() - 1 {
            left_counts[sorted[i].1 as usize] += 1;
            left_n += 1;
            if sorted[i + 1].0 <= sorted[i].0 {
                continue;
            }
            let mut right_counts = parent_counts.clone();
            for (r, l) in right_counts.iter_mut().zip(&left_counts) {
                *r -= l;
            }
            let right_n = rows.len() - left_n;
            let weighted = (left_n as f64 / n) * gini(&left_counts)
                + (right_n as f64 / n) * gini(&right_counts);
            let gain = parent_impurity - weighted;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(CandidateSplit {
                    feature,
                    threshold: 0.5 * (sorted[i].0 + sorted[i + 1].0),
                    gain,
                });
            }
        }
    }
    best
}

pub(crate) struct CartGrower<'a> {
    pub matrix: &'a FeatureMatrix,
    pub labels: &'a [u8],
    pub n_classes: usize,
    pub config: &'a TreeConfig,
}

impl CartGrower<'_> {
    /// Grow a tree; `pick_candidates` chooses the features scanned at each
    /// split (all features for a plain CART, a random subset for forests).
    pub fn grow(&self, rows: Vec<usize>, pick_candidates: &mut dyn FnMut() -> Vec<usize>) -> Tree {
        let mut tree = Tree::default();
        self.grow_node(&mut tree, rows, 0, pick_candidates);
        tree
    }

    fn leaf(&self, tree: &mut Tree, rows: &[usize]) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &i in rows {
            counts[self.labels[i] as usize] += 1;
        }
        let n = rows.len() as f64;
        tree.nodes.push(Node::Leaf {
            value: counts.iter().map(|&c| c as f64 / n).collect(),
            cover: n,
        });
        tree.nodes.len() - 1
    }

    fn grow_node(
        &self,
        tree: &mut Tree,
        rows: Vec<usize>,
        depth: u32,
        pick_candidates: &mut dyn FnMut() -> Vec<usize>,
    ) -> usize {
        let first_label = self.labels[rows[0]];
        let pure = rows.iter().all(|&i| self.labels[i] == first_label);
        if pure || depth >= self.config.max_depth || rows.len() < self.config.min_samples_split {
            return self.leaf(tree, &rows);
        }
        let candidates = pick_candidates();
        let split = match best_gini_split(self.matrix, self.labels, self.n_classes, &rows, &candidates)
        {
            Some(s) if s.gain >= self.config.min_gain => s,
            _ => return self.leaf(tree, &rows),
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.matrix.row(i)[split.feature] < split.threshold);
        let idx = tree.nodes.len();
        tree.nodes.push(Node::Leaf {
            value: Vec::new(),
            cover: 0.0,
        }); // placeholder
        let left = self.grow_node(tree, left_rows, depth + 1, pick_candidates);
        let right = self.grow_node(tree, right_rows, depth + 1, pick_candidates);
        let cover = tree.nodes[left].cover() + tree.nodes[right].cover();
        tree.nodes[idx] = Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            cover,
        };
        idx
    }
}

/// Train a CART classifier on the requested target.
pub fn train_tree(
    matrix: &FeatureMatrix,
    target: TargetKind,
    config: &TreeConfig,
) -> Result<DecisionTreeModel> {
    if matrix.n_rows() == 0 {
        return Err(Error::Domain("cannot train a tree on an empty matrix".to_string()));
    }
    let labels = target.labels(matrix);
    let grower = CartGrower {
        matrix,
        labels,
        n_classes: target.n_classes(),
        config,
    };
    let all: Vec<usize> = (0..matrix.n_cols()).collect();
    let tree = grower.grow((0..matrix.n_rows()).collect(), &mut || all.clone());
    Ok(DecisionTreeModel {
        tree,
        n_classes: target.n_classes(),
        target,
        feature_names: matrix.column_names.clone(),
        config: config.clone(),
    })
}
