//! Robustness harness: raw-column shocks with re-featurization through the
//! frozen transform state, stress re-evaluation of frozen models, and PSI
//! drift detection with retraining triggers.

use crate::error::{Error, Result};
use crate::eval::{binary_metrics, multiclass_metrics, BinaryMetrics, MultiClassMetrics};
use crate::features::{apply_transforms, FeatureMatrix, TransformState};
use crate::models::{TargetKind, TrainedModel};
use crate::panel::{PanelDataset, NUMERIC_COLUMNS};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockMode {
    /// Add magnitude x training-sd x sign to each cell.
    AdditiveSd,
    /// Scale each cell by (1 + magnitude x sign).
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockDirection {
    Up,
    Down,
    RandomSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShockSpec {
    pub target_columns: Vec<String>,
    pub mode: ShockMode,
    pub magnitude: f64,
    pub seed: u64,
    pub direction: ShockDirection,
}

impl Default for ShockSpec {
    fn default() -> Self {
        ShockSpec {
            target_columns: vec![
                "inflation".to_string(),
                "gdp_growth".to_string(),
                "cyber_incident_count".to_string(),
                "household_borrowing_rate".to_string(),
            ],
            mode: ShockMode::AdditiveSd,
            magnitude: 1.0,
            seed: 1337,
            direction: ShockDirection::RandomSign,
        }
    }
}

impl ShockSpec {
    pub fn validate(&self) -> Result<()> {
        for col in &self.target_columns {
            if col == crate::panel::CATEGORICAL_COLUMN {
                return Err(Error::Shape(format!(
                    "cannot shock categorical column '{col}'"
                )));
            }
            if !NUMERIC_COLUMNS.contains(&col.as_str()) {
                return Err(Error::Config(format!(
                    "shock target '{col}' is not a numeric schema column"
                )));
            }
        }
        if !(self.magnitude >= 0.0) {
            return Err(Error::Config(format!(
                "shock magnitude must be >= 0, got {}",
                self.magnitude
            )));
        }
        Ok(())
    }
}

/// Valid range to clamp a shocked raw value into.
fn clamp_to_domain(column: &str, value: f64) -> f64 {
    match column {
        "liquidity_score" | "ict_demand" | "digital_switch_usage" | "sme_finance_score"
        | "emergency_policy_score" => value.clamp(0.0, 100.0),
        "volatility_index" | "iot_device_density" | "household_borrowing_rate"
        | "disaster_impact" | "disaster_severity_score" => value.max(0.0),
        _ => value,
    }
}

/// Shock raw cells in the given rounds. Engineered features must be derived
/// afterwards from the shocked raw values through the frozen transform
/// state (shock-then-featurize, never featurize-then-shock).
pub fn apply_shock(
    data: &PanelDataset,
    rounds: &BTreeSet<u32>,
    spec: &ShockSpec,
    train_stats: &TransformState,
) -> Result<PanelDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = data.records().to_vec();
    for rec in &mut records {
        if !rounds.contains(&rec.round) {
            continue;
        }
        for col in &spec.target_columns {
            let sign = match spec.direction {
                ShockDirection::Up => 1.0,
                ShockDirection::Down => -1.0,
                ShockDirection::RandomSign => {
                    if rng.random::<f64>() < 0.5 {
                        -1.0
                    } else {
                        1.0
                    }
                }
            };
            let Some(old) = rec.numeric(col) else { continue };
            let new = match spec.mode {
                ShockMode::AdditiveSd => {
                    let sd = train_stats.raw_sd(col).ok_or_else(|| {
                        Error::Domain(format!("no training sd available for '{col}'"))
                    })?;
                    old + spec.magnitude * sd * sign
                }
                ShockMode::Multiplicative => old * (1.0 + spec.magnitude * sign),
            };
            rec.set_numeric(col, clamp_to_domain(col, new))?;
        }
    }
    PanelDataset::new(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StressMetrics {
    Binary(BinaryMetrics),
    MultiClass(MultiClassMetrics),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    pub spec: ShockSpec,
    pub target: TargetKind,
    pub original: StressMetrics,
    pub shocked: StressMetrics,
    /// shocked minus original, per headline metric.
    pub deltas: BTreeMap<String, f64>,
}

fn slice_rounds(matrix: &FeatureMatrix, rounds: &BTreeSet<u32>) -> FeatureMatrix {
    let idx: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| rounds.contains(&matrix.keys[i].1))
        .collect();
    matrix.select_rows(&idx)
}

fn evaluate(model: &TrainedModel, slice: &FeatureMatrix, target: TargetKind) -> Result<StressMetrics> {
    match target {
        TargetKind::Binary => {
            let scores = model.binary_score(slice)?;
            let probabilities: Vec<f64> = model
                .probabilities(slice)?
                .into_iter()
                .map(|p| p[1])
                .collect();
            Ok(StressMetrics::Binary(binary_metrics(
                &scores,
                &probabilities,
                &slice.target_binary,
            )?))
        }
        TargetKind::Severity => {
            let predicted = model.predict_class(slice)?;
            Ok(StressMetrics::MultiClass(multiclass_metrics(
                &predicted,
                &slice.target_severity,
                3,
            )?))
        }
    }
}

/// Evaluate a frozen model on original versus shocked rounds.
pub fn run_stress(
    model: &TrainedModel,
    data: &PanelDataset,
    rounds: &BTreeSet<u32>,
    spec: &ShockSpec,
    train_stats: &TransformState,
) -> Result<StressReport> {
    let target = if model.n_classes() == 2 {
        TargetKind::Binary
    } else {
        TargetKind::Severity
    };
    let original_matrix = apply_transforms(train_stats, data)?;
    let original = evaluate(model, &slice_rounds(&original_matrix, rounds), target)?;

    let shocked_data = apply_shock(data, rounds, spec, train_stats)?;
    let shocked_matrix = apply_transforms(train_stats, &shocked_data)?;
    let shocked = evaluate(model, &slice_rounds(&shocked_matrix, rounds), target)?;

    let deltas = match (&original, &shocked) {
        (StressMetrics::Binary(o), StressMetrics::Binary(s)) => BTreeMap::from([
            ("roc_auc".to_string(), s.roc_auc - o.roc_auc),
            ("pr_auc".to_string(), s.pr_auc - o.pr_auc),
            ("brier".to_string(), s.brier - o.brier),
            ("log_loss".to_string(), s.log_loss - o.log_loss),
        ]),
        (StressMetrics::MultiClass(o), StressMetrics::MultiClass(s)) => BTreeMap::from([
            ("accuracy".to_string(), s.accuracy - o.accuracy),
            ("macro_f1".to_string(), s.macro_f1 - o.macro_f1),
        ]),
        _ => unreachable!("original and shocked share the model target"),
    };

    Ok(StressReport {
        spec: spec.clone(),
        target,
        original,
        shocked,
        deltas,
    })
}

/// Type-7 (linear interpolation) quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

const PSI_FLOOR: f64 = 1e-4;

/// Population Stability Index over ten reference-decile bins (merged when
/// degenerate), proportions floored at 1e-4.
pub fn psi(reference: &[f64], current: &[f64]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Domain(
            "PSI reference distribution is empty".to_string(),
        ));
    }
    if current.is_empty() {
        return Err(Error::Domain(
            "PSI current distribution is empty".to_string(),
        ));
    }
    let mut sorted = reference.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut edges: Vec<f64> = (1..10)
        .map(|i| quantile_sorted(&sorted, i as f64 / 10.0))
        .collect();
    edges.dedup();

    let bin_of = |x: f64| edges.iter().position(|&e| x <= e).unwrap_or(edges.len());
    let n_bins = edges.len() + 1;
    let mut ref_counts = vec![0usize; n_bins];
    let mut cur_counts = vec![0usize; n_bins];
    for &x in reference {
        ref_counts[bin_of(x)] += 1;
    }
    for &x in current {
        cur_counts[bin_of(x)] += 1;
    }

    let mut total = 0.0;
    for i in 0..n_bins {
        let p_ref = (ref_counts[i] as f64 / reference.len() as f64).max(PSI_FLOOR);
        let p_cur = (cur_counts[i] as f64 / current.len() as f64).max(PSI_FLOOR);
        total += (p_cur - p_ref) * (p_cur / p_ref).ln();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub threshold: f64,
    /// Per-feature PSI between the reference and incoming slices.
    pub psi: BTreeMap<String, f64>,
    pub flagged_features: Vec<String>,
    pub retrain_recommended: bool,
}

/// Per-feature PSI between two round slices of the panel; features whose
/// PSI exceeds the threshold are flagged.
pub fn drift_check(
    data: &PanelDataset,
    reference_rounds: &BTreeSet<u32>,
    incoming_rounds: &BTreeSet<u32>,
    threshold: f64,
) -> Result<DriftReport> {
    drift_check_between(data, data, reference_rounds, incoming_rounds, threshold)
}

/// Drift between slices of two datasets sharing the canonical schema (used
/// when the incoming slice was shocked).
pub fn drift_check_between(
    reference_data: &PanelDataset,
    incoming_data: &PanelDataset,
    reference_rounds: &BTreeSet<u32>,
    incoming_rounds: &BTreeSet<u32>,
    threshold: f64,
) -> Result<DriftReport> {
    let mut psi_map = BTreeMap::new();
    let mut flagged = Vec::new();
    for col in NUMERIC_COLUMNS {
        let reference: Vec<f64> = reference_data
            .records()
            .iter()
            .filter(|r| reference_rounds.contains(&r.round))
            .filter_map(|r| r.numeric(col))
            .collect();
        let incoming: Vec<f64> = incoming_data
            .records()
            .iter()
            .filter(|r| incoming_rounds.contains(&r.round))
            .filter_map(|r| r.numeric(col))
            .collect();
        let value = psi(&reference, &incoming)?;
        if value > threshold {
            flagged.push(col.to_string());
        }
        psi_map.insert(col.to_string(), value);
    }
    let retrain_recommended = !flagged.is_empty();
    Ok(DriftReport {
        threshold,
        psi: psi_map,
        flagged_features: flagged,
        retrain_recommended,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{fit_transforms, FeatureRecipe};
    use crate::panel::{generate_synthetic, GeneratorConfig};

    fn setup() -> (PanelDataset, TransformState) {
        let data = generate_synthetic(&GeneratorConfig {
            n_households: 60,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let state = fit_transforms(&data, &FeatureRecipe::default(), &BTreeSet::from([1])).unwrap();
        (data, state)
    }

    #[test]
    fn zero_magnitude_shock_is_identity() {
        let (data, state) = setup();
        let spec = ShockSpec {
            magnitude: 0.0,
            ..ShockSpec::default()
        };
        let shocked = apply_shock(&data, &BTreeSet::from([2]), &spec, &state).unwrap();
        assert_eq!(shocked, data);
    }

    #[test]
    fn additive_shock_adds_training_sd_multiples() {
        let (data, state) = setup();
        let spec = ShockSpec {
            target_columns: vec!["inflation".to_string()],
            direction: ShockDirection::Up,
            magnitude: 1.0,
            ..ShockSpec::default()
        };
        let rounds = BTreeSet::from([2]);
        let shocked = apply_shock(&data, &rounds, &spec, &state).unwrap();
        let sd = state.raw_sd("inflation").unwrap();
        for (a, b) in data.records().iter().zip(shocked.records()) {
            if a.round == 2 {
                assert!((b.inflation.unwrap() - (a.inflation.unwrap() + sd)).abs() < 1e-12);
            } else {
                assert_eq!(a.inflation, b.inflation);
            }
        }
    }

    #[test]
    fn shock_then_unshock_restores_raw_values() {
        let (data, state) = setup();
        let rounds = BTreeSet::from([2]);
        let up = ShockSpec {
            direction: ShockDirection::Up,
            ..ShockSpec::default()
        };
        let down = ShockSpec {
            direction: ShockDirection::Down,
            ..ShockSpec::default()
        };
        let restored =
            apply_shock(&apply_shock(&data, &rounds, &up, &state).unwrap(), &rounds, &down, &state)
                .unwrap();
        for (a, b) in data.records().iter().zip(restored.records()) {
            for col in NUMERIC_COLUMNS {
                let (x, y) = (a.numeric(col).unwrap(), b.numeric(col).unwrap());
                assert!((x - y).abs() < 1e-12, "{col}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn categorical_shock_target_is_a_type_error() {
        let spec = ShockSpec {
            target_columns: vec!["disaster_level".to_string()],
            ..ShockSpec::default()
        };
        assert!(matches!(spec.validate(), Err(Error::Shape(_))));
    }

    #[test]
    fn psi_of_identical_distributions_is_zero() {
        let values: Vec<f64> = (0..200).map(|i| f64::from(i % 17)).collect();
        assert!(psi(&values, &values).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn psi_two_bin_hand_case() {
        let reference: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 2.0 }).collect();
        let current: Vec<f64> = (0..10).map(|i| if i < 8 { 1.0 } else { 2.0 }).collect();
        let value = psi(&reference, &current).unwrap();
        let expected = 0.3 * (1.6_f64).ln() + (-0.3) * (0.4_f64).ln();
        assert!((value - expected).abs() < 1e-12);
        assert!((value - 0.41589).abs() < 1e-4);
    }

    #[test]
    fn constant_reference_merges_to_single_bin() {
        let reference = vec![3.0; 50];
        let current = vec![3.0; 20];
        assert_eq!(psi(&reference, &current).unwrap(), 0.0);
    }

    #[test]
    fn drift_self_comparison_has_no_flags() {
        let (data, _) = setup();
        let report = drift_check(&data, &BTreeSet::from([1]), &BTreeSet::from([1]), 0.25).unwrap();
        assert!(report.flagged_features.is_empty());
        assert!(!report.retrain_recommended);
        for (_, v) in report.psi {
            assert!(v.abs() <= 1e-12);
        }
    }

    #[test]
    fn three_sd_mean_shift_is_flagged() {
        let (data, state) = setup();
        let sd = state.raw_sd("inflation").unwrap();
        let mut records = data.records().to_vec();
        for rec in &mut records {
            if rec.round == 2 {
                rec.inflation = Some(rec.inflation.unwrap() + 3.0 * sd);
            }
        }
        let shifted = PanelDataset::new(records).unwrap();
        let report = drift_check_between(
            &data,
            &shifted,
            &BTreeSet::from([1]),
            &BTreeSet::from([2]),
            0.25,
        )
        .unwrap();
        assert!(report.psi["inflation"] > 0.25, "psi = {}", report.psi["inflation"]);
        assert!(report.flagged_features.contains(&"inflation".to_string()));
        assert!(report.retrain_recommended);
    }

    #[test]
    fn infinite_threshold_never_recommends_retraining() {
        let (data, state) = setup();
        let spec = ShockSpec::default();
        let rounds = BTreeSet::from([2]);
        let shocked = apply_shock(&data, &rounds, &spec, &state).unwrap();
        let report = drift_check_between(
            &data,
            &shocked,
            &BTreeSet::from([1]),
            &rounds,
            f64::INFINITY,
        )
        .unwrap();
        assert!(!report.retrain_recommended);
    }

    #[test]
    fn stress_with_zero_magnitude_has_zero_deltas() {
        let (data, state) = setup();
        let matrix = apply_transforms(&state, &data).unwrap();
        let train_idx: Vec<usize> = (0..matrix.n_rows())
            .filter(|&i| matrix.keys[i].1 == 1)
            .collect();
        let train = matrix.select_rows(&train_idx);
        let model = TrainedModel::Boosted(
            crate::models::train_gbdt(
                &train,
                TargetKind::Binary,
                &crate::models::GbdtConfig {
                    n_rounds: 10,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let spec = ShockSpec {
            magnitude: 0.0,
            ..ShockSpec::default()
        };
        let report = run_stress(&model, &data, &BTreeSet::from([2]), &spec, &state).unwrap();
        for (name, delta) in &report.deltas {
            assert_eq!(*delta, 0.0, "{name}");
        }
        assert_eq!(report.original, report.shocked);
    }
}
