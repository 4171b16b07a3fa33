//! Additive explanations: exact TreeSHAP for tree ensembles, closed-form
//! SHAP for the linear model, global importance rankings, and plain-language
//! per-household narratives.

mod treeshap;

pub use treeshap::tree_shap;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::{LinearModel, Objective, TrainedModel};
use serde::{Deserialize, Serialize};

/// Additive decomposition of one prediction in margin space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub key: (u32, u32),
    /// Expected margin over the training distribution (cover-weighted).
    pub base_value: f64,
    /// Aligned to the model's feature columns.
    pub contributions: Vec<f64>,
    pub predicted_margin: f64,
    /// For multi-class models, the class this attribution explains.
    pub explained_class: Option<u8>,
}

impl ShapAttribution {
    /// |base + sum(phi) - margin|; zero up to float noise by construction.
    pub fn efficiency_gap(&self) -> f64 {
        (self.base_value + self.contributions.iter().sum::<f64>() - self.predicted_margin).abs()
    }
}

/// SHAP attributions for every row of a matrix under a tree-based model.
///
/// Boosted models are explained in margin (log-odds) space; tree and forest
/// models in their native class-frequency space. For multi-class models
/// `class` selects the explained output; `None` explains each row's
/// predicted class.
pub fn ensemble_shap(
    model: &TrainedModel,
    matrix: &FeatureMatrix,
    class: Option<u8>,
) -> Result<Vec<ShapAttribution>> {
    let n_features = model.feature_names().len();
    if matrix.n_cols() != n_features {
        return Err(Error::Shape(format!(
            "model expects {n_features} features but rows have {}",
            matrix.n_cols()
        )));
    }
    let predicted_classes = match class {
        Some(c) => vec![c; matrix.n_rows()],
        None => match model.n_classes() {
            2 => vec![1; matrix.n_rows()],
            _ => model.predict_class(matrix)?,
        },
    };

    match model {
        TrainedModel::Logistic(_) => Err(Error::Model(
            "use linear_shap for the logistic model".to_string(),
        )),
        TrainedModel::Tree(tree_model) => {
            let mut out = Vec::with_capacity(matrix.n_rows());
            for i in 0..matrix.n_rows() {
                let row = matrix.row(i);
                let output = predicted_classes[i] as usize;
                let contributions = tree_shap(&tree_model.tree, row, n_features, output)?;
                let base_value = tree_model.tree.expected_value(output);
                out.push(ShapAttribution {
                    key: matrix.keys[i],
                    base_value,
                    contributions,
                    predicted_margin: tree_model.tree.leaf_value(row)[output],
                    explained_class: Some(predicted_classes[i]),
                });
            }
            Ok(out)
        }
        TrainedModel::Forest(forest) => {
            let scale = 1.0 / forest.trees.len() as f64;
            let mut out = Vec::with_capacity(matrix.n_rows());
            for i in 0..matrix.n_rows() {
                let row = matrix.row(i);
                let output = predicted_classes[i] as usize;
                let mut contributions = vec![0.0; n_features];
                let mut base_value = 0.0;
                for tree in &forest.trees {
                    let phi = tree_shap(tree, row, n_features, output)?;
                    for (acc, p) in contributions.iter_mut().zip(&phi) {
                        *acc += scale * p;
                    }
                    base_value += scale * tree.expected_value(output);
                }
                out.push(ShapAttribution {
                    key: matrix.keys[i],
                    base_value,
                    contributions,
                    predicted_margin: forest.probability(row)[output],
                    explained_class: Some(predicted_classes[i]),
                });
            }
            Ok(out)
        }
        TrainedModel::Boosted(ensemble) => {
            let outputs = if ensemble.objective == Objective::BinaryLogloss {
                1
            } else {
                ensemble.n_classes
            };
            let mut out = Vec::with_capacity(matrix.n_rows());
            for i in 0..matrix.n_rows() {
                let row = matrix.row(i);
                let explained = if outputs == 1 {
                    0
                } else {
                    predicted_classes[i] as usize
                };
                let mut contributions = vec![0.0; n_features];
                let mut base_value = ensemble.base_score[explained];
                for (t, tree) in ensemble.trees.iter().enumerate() {
                    if t % outputs != explained {
                        continue;
                    }
                    let phi = tree_shap(tree, row, n_features, 0)?;
                    for (acc, p) in contributions.iter_mut().zip(&phi) {
                        *acc += ensemble.learning_rate * p;
                    }
                    base_value += ensemble.learning_rate * tree.expected_value(0);
                }
                out.push(ShapAttribution {
                    key: matrix.keys[i],
                    base_value,
                    contributions,
                    predicted_margin: ensemble.margins(row)[explained],
                    explained_class: if outputs == 1 {
                        Some(1)
                    } else {
                        Some(predicted_classes[i])
                    },
                });
            }
            Ok(out)
        }
    }
}

/// Closed-form SHAP for the linear model: phi_j = w_j (x_j - mean_j), base =
/// w . mean + b, all in margin space.
pub fn linear_shap(
    model: &LinearModel,
    row: &[f64],
    key: (u32, u32),
    background_means: &[f64],
) -> Result<ShapAttribution> {
    if row.len() != model.weights.len() || background_means.len() != model.weights.len() {
        return Err(Error::Shape(format!(
            "row/background length must equal weight count {}",
            model.weights.len()
        )));
    }
    let contributions: Vec<f64> = model
        .weights
        .iter()
        .zip(row.iter().zip(background_means))
        .map(|(w, (x, m))| w * (x - m))
        .collect();
    let base_value = model.bias
        + model
            .weights
            .iter()
            .zip(background_means)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    Ok(ShapAttribution {
        key,
        base_value,
        contributions,
        predicted_margin: model.margin(row),
        explained_class: Some(1),
    })
}

/// Feature ranking by mean absolute contribution, descending; ties break by
/// feature name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub ranking: Vec<(String, f64)>,
}

pub fn global_importance(
    attributions: &[ShapAttribution],
    feature_names: &[String],
) -> Result<GlobalImportance> {
    if attributions.is_empty() {
        return Err(Error::Domain(
            "cannot rank importance over an empty attribution set".to_string(),
        ));
    }
    let n = attributions.len() as f64;
    let mut totals = vec![0.0_f64; feature_names.len()];
    for attr in attributions {
        if attr.contributions.len() != feature_names.len() {
            return Err(Error::Shape(
                "attribution width does not match feature names".to_string(),
            ));
        }
        for (t, c) in totals.iter_mut().zip(&attr.contributions) {
            *t += c.abs();
        }
    }
    let mut ranking: Vec<(String, f64)> = feature_names
        .iter()
        .cloned()
        .zip(totals.into_iter().map(|t| t / n))
        .collect();
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    Ok(GlobalImportance { ranking })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    TowardDistress,
    TowardStability,
}

impl Direction {
    fn phrase(self) -> &'static str {
        match self {
            Direction::TowardDistress => "distress",
            Direction::TowardStability => "stability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeFactor {
    pub feature: String,
    pub value: f64,
    pub contribution: f64,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Narrative {
    pub key: (u32, u32),
    pub direction: Direction,
    pub top_factors: Vec<NarrativeFactor>,
}

/// Three-significant-digit fixed rendering for byte-stable narratives.
fn format_sig3(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).clamp(0, 9) as usize;
    format!("{x:.decimals$}")
}

/// Template narrative from the top-k absolute contributions.
pub fn render_narrative(
    attr: &ShapAttribution,
    feature_names: &[String],
    row: &[f64],
    k: usize,
) -> Narrative {
    let shift = attr.predicted_margin - attr.base_value;
    let direction = if shift > 0.0 {
        Direction::TowardDistress
    } else if shift < 0.0 {
        Direction::TowardStability
    } else if attr.base_value >= 0.0 {
        Direction::TowardDistress
    } else {
        Direction::TowardStability
    };

    let mut order: Vec<usize> = (0..attr.contributions.len()).collect();
    order.sort_by(|&a, &b| {
        attr.contributions[b]
            .abs()
            .partial_cmp(&attr.contributions[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let top_factors = order
        .into_iter()
        .take(k)
        .map(|j| {
            let contribution = attr.contributions[j];
            let factor_direction = if contribution >= 0.0 {
                Direction::TowardDistress
            } else {
                Direction::TowardStability
            };
            NarrativeFactor {
                feature: feature_names[j].clone(),
                value: row[j],
                contribution,
                phrase: format!(
                    "{} at {} pushed the prediction toward {} by {}",
                    feature_names[j],
                    format_sig3(row[j]),
                    factor_direction.phrase(),
                    format_sig3(contribution.abs())
                ),
            }
        })
        .collect();

    Narrative {
        key: attr.key,
        direction,
        top_factors,
    }
}
