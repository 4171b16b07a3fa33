//! Temporal round-based splitting and evaluation metrics: ROC-AUC (rank
//! statistic, ties half), average precision, accuracy, macro-F1, confusion
//! matrices, Brier score, log loss, and reliability curves.

mod report;

pub use report::{
    BinaryEvaluation, CalibrationBlock, EvaluationReport, ModelEvaluation, MultiClassEvaluation,
    EVALUATION_SCHEMA_VERSION,
};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Which rounds feed training, validation, and test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_rounds: BTreeSet<u32>,
    pub validation_rounds: BTreeSet<u32>,
    pub test_rounds: BTreeSet<u32>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_rounds: BTreeSet::from([1]),
            validation_rounds: BTreeSet::from([2]),
            test_rounds: BTreeSet::from([3]),
        }
    }
}

impl SplitSpec {
    /// Disjointness plus strict ordering: train < validation < test.
    pub fn validate(&self) -> Result<()> {
        if self.train_rounds.is_empty() {
            return Err(Error::Config("train_rounds must be nonempty".to_string()));
        }
        let overlap_vt: Vec<_> = self.train_rounds.intersection(&self.validation_rounds).collect();
        let overlap_tt: Vec<_> = self.train_rounds.intersection(&self.test_rounds).collect();
        let overlap_vv: Vec<_> = self
            .validation_rounds
            .intersection(&self.test_rounds)
            .collect();
        if !overlap_vt.is_empty() || !overlap_tt.is_empty() || !overlap_vv.is_empty() {
            return Err(Error::Config(
                "split rounds must be pairwise disjoint".to_string(),
            ));
        }
        let max_train = self.train_rounds.iter().max();
        let min_val = self.validation_rounds.iter().min();
        let max_val = self.validation_rounds.iter().max();
        let min_test = self.test_rounds.iter().min();
        if let (Some(t), Some(v)) = (max_train, min_val) {
            if t > v {
                return Err(Error::Config(format!(
                    "train round {t} follows validation round {v}"
                )));
            }
        }
        if let (Some(v), Some(s)) = (max_val, min_test) {
            if v > s {
                return Err(Error::Config(format!(
                    "validation round {v} follows test round {s}"
                )));
            }
        }
        if let (Some(t), Some(s)) = (max_train, min_test) {
            if t > s {
                return Err(Error::Config(format!(
                    "train round {t} follows test round {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Partition a feature matrix by round into train/validation/test slices.
/// Every row must land in exactly one slice.
pub fn temporal_split(
    matrix: &FeatureMatrix,
    spec: &SplitSpec,
) -> Result<(FeatureMatrix, FeatureMatrix, FeatureMatrix)> {
    spec.validate()?;
    let rounds_present: BTreeSet<u32> = matrix.keys.iter().map(|k| k.1).collect();
    for (name, rounds) in [
        ("train", &spec.train_rounds),
        ("validation", &spec.validation_rounds),
        ("test", &spec.test_rounds),
    ] {
        for r in rounds {
            if !rounds_present.contains(r) {
                return Err(Error::Config(format!(
                    "{name} round {r} is not present in the data"
                )));
            }
        }
    }
    for r in &rounds_present {
        if !spec.train_rounds.contains(r)
            && !spec.validation_rounds.contains(r)
            && !spec.test_rounds.contains(r)
        {
            return Err(Error::Config(format!(
                "round {r} is not assigned to any split"
            )));
        }
    }
    let pick = |rounds: &BTreeSet<u32>| {
        let idx: Vec<usize> = (0..matrix.n_rows())
            .filter(|&i| rounds.contains(&matrix.keys[i].1))
            .collect();
        matrix.select_rows(&idx)
    };
    Ok((
        pick(&spec.train_rounds),
        pick(&spec.validation_rounds),
        pick(&spec.test_rounds),
    ))
}

/// ROC-AUC as the probability that a random positive outranks a random
/// negative, ties counted one half. Computed via midranks, which matches
/// exhaustive pair counting exactly.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "scores ({}) and labels ({}) differ in length",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Domain(
            "ROC-AUC is undefined when labels contain a single class".to_string(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Midranks over tie blocks; rank sums of halves stay exact in f64.
    let mut rank_sum_positive = 0.0_f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_positive += midrank;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_positive - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: descending-score sweep, equal scores processed as one
/// block; precision at each block times the recall increment.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "scores ({}) and labels ({}) differ in length",
            scores.len(),
            labels.len()
        )));
    }
    let total_positives = labels.iter().filter(|&&y| y == 1).count();
    if total_positives == 0 {
        return Err(Error::Domain(
            "average precision is undefined without positives".to_string(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0_f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let block_positives = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        seen += j - i + 1;
        tp += block_positives;
        if block_positives > 0 {
            let precision = tp as f64 / seen as f64;
            ap += precision * (block_positives as f64 / total_positives as f64);
        }
        i = j + 1;
    }
    Ok(ap)
}

/// Confusion matrix and derived multi-class metrics over labels in 0..k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// confusion[t][p] counts rows with true class t predicted as p.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
}

pub fn multiclass_metrics(
    predicted: &[u8],
    truth: &[u8],
    n_classes: usize,
) -> Result<MultiClassMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "predicted ({}) and truth ({}) differ in length",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Domain("no rows to evaluate".to_string()));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if (p as usize) >= n_classes || (t as usize) >= n_classes {
            return Err(Error::Shape(format!(
                "label out of range for {n_classes} classes: predicted {p}, true {t}"
            )));
        }
        confusion[t as usize][p as usize] += 1;
    }
    let total: usize = predicted.len();
    let trace: usize = (0..n_classes).map(|k| confusion[k][k]).sum();
    let accuracy = trace as f64 / total as f64;

    let mut precision = vec![0.0; n_classes];
    let mut recall = vec![0.0; n_classes];
    let mut f1 = vec![0.0; n_classes];
    for k in 0..n_classes {
        let tp = confusion[k][k];
        let predicted_k: usize = (0..n_classes).map(|t| confusion[t][k]).sum();
        let support_k: usize = confusion[k].iter().sum();
        precision[k] = if predicted_k == 0 {
            0.0
        } else {
            tp as f64 / predicted_k as f64
        };
        recall[k] = if support_k == 0 {
            0.0
        } else {
            tp as f64 / support_k as f64
        };
        f1[k] = if precision[k] + recall[k] == 0.0 {
            0.0
        } else {
            2.0 * precision[k] * recall[k] / (precision[k] + recall[k])
        };
    }
    let macro_f1 = f1.iter().sum::<f64>() / n_classes as f64;

    Ok(MultiClassMetrics {
        accuracy,
        macro_f1,
        confusion,
        per_class_precision: precision,
        per_class_recall: recall,
        per_class_f1: f1,
    })
}

/// Mean squared error between probabilities and binary outcomes.
pub fn brier(probabilities: &[f64], labels: &[u8]) -> Result<f64> {
    check_probabilities(probabilities, labels)?;
    let n = probabilities.len() as f64;
    Ok(probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - f64::from(y)).powi(2))
        .sum::<f64>()
        / n)
}

/// Mean negative log likelihood with probabilities clamped away from 0/1.
pub fn log_loss(probabilities: &[f64], labels: &[u8]) -> Result<f64> {
    check_probabilities(probabilities, labels)?;
    let n = probabilities.len() as f64;
    Ok(probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(1e-15, 1.0 - 1e-15);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n)
}

fn check_probabilities(probabilities: &[f64], labels: &[u8]) -> Result<()> {
    if probabilities.len() != labels.len() {
        return Err(Error::Shape(format!(
            "probabilities ({}) and labels ({}) differ in length",
            probabilities.len(),
            labels.len()
        )));
    }
    if probabilities.is_empty() {
        return Err(Error::Domain("no rows to evaluate".to_string()));
    }
    if let Some(p) = probabilities
        .iter()
        .find(|p| !(0.0..=1.0).contains(*p) || !p.is_finite())
    {
        return Err(Error::Domain(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// One reliability bin: mean predicted probability, observed positive
/// frequency, and row count. Empty bins carry `None` summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub mean_predicted: Option<f64>,
    pub observed_frequency: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
}

const CALIBRATION_BINS: usize = 10;

/// Ten equal-width probability bins; p = 1.0 falls in the last bin.
pub fn calibration_bins(probabilities: &[f64], labels: &[u8]) -> Result<CalibrationCurve> {
    check_probabilities(probabilities, labels)?;
    let mut sums = vec![0.0_f64; CALIBRATION_BINS];
    let mut hits = vec![0usize; CALIBRATION_BINS];
    let mut counts = vec![0usize; CALIBRATION_BINS];
    for (&p, &y) in probabilities.iter().zip(labels) {
        let idx = ((p * CALIBRATION_BINS as f64) as usize).min(CALIBRATION_BINS - 1);
        sums[idx] += p;
        hits[idx] += usize::from(y == 1);
        counts[idx] += 1;
    }
    let bins = (0..CALIBRATION_BINS)
        .map(|i| {
            let width = 1.0 / CALIBRATION_BINS as f64;
            CalibrationBin {
                lo: i as f64 * width,
                hi: (i + 1) as f64 * width,
                mean_predicted: (counts[i] > 0).then(|| sums[i] / counts[i] as f64),
                observed_frequency: (counts[i] > 0).then(|| hits[i] as f64 / counts[i] as f64),
                count: counts[i],
            }
        })
        .collect();
    Ok(CalibrationCurve { bins })
}

/// Binary metric bundle at the 0.5 classification threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub brier: f64,
    pub log_loss: f64,
    /// [[tn, fp], [fn, tp]]
    pub confusion: [[usize; 2]; 2],
    pub prevalence: f64,
}

pub fn binary_metrics(scores: &[f64], probabilities: &[f64], labels: &[u8]) -> Result<BinaryMetrics> {
    let roc = roc_auc(scores, labels)?;
    let pr = pr_auc(scores, labels)?;
    let brier_score = brier(probabilities, labels)?;
    let ll = log_loss(probabilities, labels)?;
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &y) in probabilities.iter().zip(labels) {
        let predicted = usize::from(p >= 0.5);
        confusion[y as usize][predicted] += 1;
    }
    let prevalence = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / labels.len() as f64;
    Ok(BinaryMetrics {
        roc_auc: roc,
        pr_auc: pr,
        brier: brier_score,
        log_loss: ll,
        confusion,
        prevalence,
    })
}

#[cfg(test)]
mod tests;
