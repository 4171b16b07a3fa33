//! Versioned JSON model persistence: objective, hyperparameters, base
//! score, feature names, and flattened tree arrays with child indices.
//! Documents round-trip save -> load -> save bit-exactly.

use super::{
    BoostedEnsemble, DecisionTreeModel, ForestModel, Growth, LinearModel, Node,
    Objective, TargetKind, TrainedModel, Tree, TreeConfig,
};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: &str = "model-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SavedNode {
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<Vec<f64>>,
    cover: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SavedTree {
    nodes: Vec<SavedNode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "snake_case")]
enum SavedModel {
    Logistic {
        l2_lambda: f64,
        bias: f64,
        weights: Vec<f64>,
        training_loss_trace: Vec<f64>,
        feature_names: Vec<String>,
    },
    Tree {
        target: TargetKind,
        n_classes: usize,
        config: TreeConfig,
        tree: SavedTree,
        feature_names: Vec<String>,
    },
    Forest {
        target: TargetKind,
        n_classes: usize,
        feature_subsample: usize,
        bootstrap_seed: u64,
        trees: Vec<SavedTree>,
        feature_names: Vec<String>,
    },
    Boosted {
        objective: Objective,
        n_classes: usize,
        base_score: Vec<f64>,
        learning_rate: f64,
        l2_lambda: f64,
        min_child_weight: f64,
        growth: Growth,
        n_rounds: u32,
        trees: Vec<SavedTree>,
        training_loss_trace: Vec<f64>,
        feature_names: Vec<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    format_version: String,
    model: SavedModel,
}

fn tree_to_saved(tree: &Tree) -> SavedTree {
    SavedTree {
        nodes: tree
            .nodes
            .iter()
            .map(|n| match n {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    cover,
                } => SavedNode {
                    feature: Some(*feature),
                    threshold: Some(*threshold),
                    left: Some(*left),
                    right: Some(*right),
                    value: None,
                    cover: *cover,
                },
                Node::Leaf { value, cover } => SavedNode {
                    feature: None,
                    threshold: None,
                    left: None,
                    right: None,
                    value: Some(value.clone()),
                    cover: *cover,
                },
            })
            .collect(),
    }
}

fn saved_to_tree(saved: SavedTree) -> Result<Tree> {
    let n = saved.nodes.len();
    let nodes = saved
        .nodes
        .into_iter()
        .enumerate()
        .map(|(i, node)| match node {
            SavedNode {
                feature: Some(feature),
                threshold: Some(threshold),
                left: Some(left),
                right: Some(right),
                value: None,
                cover,
            } => {
                if left >= n || right >= n {
                    return Err(Error::Model(format!(
                        "node {i}: child index out of range in saved tree"
                    )));
                }
                Ok(Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    cover,
                })
            }
            SavedNode {
                feature: None,
                threshold: None,
                left: None,
                right: None,
                value: Some(value),
                cover,
            } => Ok(Node::Leaf { value, cover }),
            _ => Err(Error::Model(format!(
                "node {i}: malformed saved node (mixed leaf/internal fields)"
            ))),
        })
        .collect::<Result<Vec<Node>>>()?;
    if nodes.is_empty() {
        return Err(Error::Model("saved tree has no nodes".to_string()));
    }
    Ok(Tree { nodes })
}

/// Serialize a model to its canonical JSON document.
pub fn model_to_json(model: &TrainedModel) -> String {
    let saved = match model {
        TrainedModel::Logistic(m) => SavedModel::Logistic {
            l2_lambda: m.l2_lambda,
            bias: m.bias,
            weights: m.weights.clone(),
            training_loss_trace: m.training_loss_trace.clone(),
            feature_names: m.feature_names.clone(),
        },
        TrainedModel::Tree(m) => SavedModel::Tree {
            target: m.target,
            n_classes: m.n_classes,
            config: m.config.clone(),
            tree: tree_to_saved(&m.tree),
            feature_names: m.feature_names.clone(),
        },
        TrainedModel::Forest(m) => SavedModel::Forest {
            target: m.target,
            n_classes: m.n_classes,
            feature_subsample: m.feature_subsample,
            bootstrap_seed: m.bootstrap_seed,
            trees: m.trees.iter().map(tree_to_saved).collect(),
            feature_names: m.feature_names.clone(),
        },
        TrainedModel::Boosted(m) => SavedModel::Boosted {
            objective: m.objective,
            n_classes: m.n_classes,
            base_score: m.base_score.clone(),
            learning_rate: m.learning_rate,
            l2_lambda: m.l2_lambda,
            min_child_weight: m.min_child_weight,
            growth: m.growth,
            n_rounds: m.n_rounds,
            trees: m.trees.iter().map(tree_to_saved).collect(),
            training_loss_trace: m.training_loss_trace.clone(),
            feature_names: m.feature_names.clone(),
        },
    };
    let doc = ModelDocument {
        format_version: MODEL_FORMAT_VERSION.to_string(),
        model: saved,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("model serializes");
    out.push('\n');
    out
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let doc: ModelDocument = serde_json::from_str(text)
        .map_err(|e| Error::Model(format!("cannot parse model JSON: {e}")))?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Model(format!(
            "unsupported model format version '{}'",
            doc.format_version
        )));
    }
    Ok(match doc.model {
        SavedModel::Logistic {
            l2_lambda,
            bias,
            weights,
            training_loss_trace,
            feature_names,
        } => TrainedModel::Logistic(LinearModel {
            weights,
            bias,
            l2_lambda,
            training_loss_trace,
            feature_names,
        }),
        SavedModel::Tree {
            target,
            n_classes,
            config,
            tree,
            feature_names,
        } => TrainedModel::Tree(DecisionTreeModel {
            tree: saved_to_tree(tree)?,
            n_classes,
            target,
            feature_names,
            config,
        }),
        SavedModel::Forest {
            target,
            n_classes,
            feature_subsample,
            bootstrap_seed,
            trees,
            feature_names,
        } => TrainedModel::Forest(ForestModel {
            trees: trees
                .into_iter()
                .map(saved_to_tree)
                .collect::<Result<Vec<Tree>>>()?,
            n_classes,
            target,
            feature_subsample,
            bootstrap_seed,
            feature_names,
        }),
        SavedModel::Boosted {
            objective,
            n_classes,
            base_score,
            learning_rate,
            l2_lambda,
            min_child_weight,
            growth,
            n_rounds,
            trees,
            training_loss_trace,
            feature_names,
        } => TrainedModel::Boosted(BoostedEnsemble {
            objective,
            n_classes,
            base_score,
            learning_rate,
            l2_lambda,
            min_child_weight,
            growth,
            n_rounds,
            trees: trees
                .into_iter()
                .map(saved_to_tree)
                .collect::<Result<Vec<Tree>>>()?,
            training_loss_trace,
            feature_names,
        }),
    })
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
