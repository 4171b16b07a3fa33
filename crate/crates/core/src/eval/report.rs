//! Serializable evaluation bundle consumed by the report stage.

use super::{BinaryMetrics, CalibrationCurve, MultiClassMetrics, SplitSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const EVALUATION_SCHEMA_VERSION: &str = "evaluation-v1";

/// Raw-versus-calibrated comparison on the validation slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBlock {
    pub platt_a: f64,
    pub platt_b: f64,
    pub raw_brier: f64,
    pub calibrated_brier: f64,
    pub raw_roc_auc: f64,
    pub calibrated_roc_auc: f64,
    pub raw_curve: CalibrationCurve,
    pub calibrated_curve: CalibrationCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryEvaluation {
    pub validation: BinaryMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<BinaryMetrics>,
    pub calibration: CalibrationBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassEvaluation {
    pub validation: MultiClassMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<MultiClassMetrics>,
}

/// Either task's evaluation for one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEvaluation {
    Binary(Box<BinaryEvaluation>),
    MultiClass(MultiClassEvaluation),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: String,
    pub config_hash: String,
    pub split: SplitSpec,
    /// Keyed by model family name (logistic, tree, forest,
    /// gbdt_depthwise, gbdt_leafwise).
    pub binary: BTreeMap<String, BinaryEvaluation>,
    pub severity: BTreeMap<String, MultiClassEvaluation>,
}
