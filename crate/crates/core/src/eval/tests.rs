use super::*;
use crate::features::{apply_transforms, fit_transforms, FeatureRecipe};
use crate::panel::{generate_synthetic, GeneratorConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exhaustive positive-by-negative pair counting, ties worth one half.
fn roc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0_f64;
    let mut pairs = 0.0_f64;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Threshold-sweep average precision recomputed from scratch at each
/// distinct score.
fn ap_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let total_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        let mut tp = 0.0;
        let mut fp = 0.0;
        for (&s, &y) in scores.iter().zip(labels) {
            if s >= t {
                if y == 1 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let precision = tp / (tp + fp);
        let recall = tp / total_pos;
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    ap
}

#[test]
fn roc_auc_perfect_separation_is_one() {
    let auc = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
    assert_eq!(auc, 1.0);
}

#[test]
fn roc_auc_of_constant_scores_is_half() {
    let auc = roc_auc(&[0.5; 6], &[0, 1, 0, 1, 0, 1]).unwrap();
    assert_eq!(auc, 0.5);
}

#[test]
fn roc_auc_matches_pair_counting_exactly_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..200 {
        let n = rng.random_range(10..=200);
        let quantize = trial % 2 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random_range(0.0..1.0);
                if quantize {
                    (s * 10.0).round() / 10.0
                } else {
                    s
                }
            })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        labels[0] = 1;
        labels[1] = 0;
        let fast = roc_auc(&scores, &labels).unwrap();
        let slow = roc_oracle(&scores, &labels);
        assert_eq!(fast, slow, "trial {trial}");
    }
}

#[test]
fn roc_auc_complement_identity_and_monotone_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scores: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut labels: Vec<u8> = (0..100).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
    labels[0] = 1;
    labels[1] = 0;
    let auc = roc_auc(&scores, &labels).unwrap();
    let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
    let auc_neg = roc_auc(&neg, &labels).unwrap();
    assert!((auc + auc_neg - 1.0).abs() < 1e-12);

    let transformed: Vec<f64> = scores.iter().map(|s| (s * 3.0).exp()).collect();
    let auc_t = roc_auc(&transformed, &labels).unwrap();
    assert!((auc - auc_t).abs() < 1e-12);
}

#[test]
fn single_class_labels_are_an_error() {
    assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
    assert!(pr_auc(&[0.1, 0.2], &[0, 0]).is_err());
}

#[test]
fn average_precision_perfect_ranking_is_one() {
    assert_eq!(pr_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
}

#[test]
fn average_precision_hand_case_single_positive_ranked_second() {
    let ap = pr_auc(&[0.2, 0.9], &[1, 0]).unwrap();
    assert_eq!(ap, 0.5);
}

#[test]
fn average_precision_matches_threshold_sweep_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for trial in 0..200 {
        let n = rng.random_range(5..=150);
        let quantize = trial % 3 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random_range(0.0..1.0);
                if quantize {
                    (s * 8.0).round() / 8.0
                } else {
                    s
                }
            })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.35)).collect();
        labels[0] = 1;
        let fast = pr_auc(&scores, &labels).unwrap();
        let slow = ap_oracle(&scores, &labels);
        assert!((fast - slow).abs() <= 1e-12, "trial {trial}: {fast} vs {slow}");
    }
}

#[test]
fn random_scores_average_precision_approximates_prevalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let prevalence = 0.27;
    let n = 1000;
    let positives = (prevalence * n as f64) as usize;
    let mut total = 0.0;
    for _ in 0..200 {
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut labels = vec![0u8; n];
        // Random positions for the positives via the same stream.
        for k in 0..positives {
            loop {
                let idx = rng.random_range(0..n);
                if labels[idx] == 0 {
                    labels[idx] = 1;
                    break;
                }
            }
            let _ = k;
        }
        total += pr_auc(&scores, &labels).unwrap();
    }
    let mean_ap = total / 200.0;
    assert!(
        (mean_ap - prevalence).abs() < 0.03,
        "mean AP {mean_ap} vs prevalence {prevalence}"
    );
}

#[test]
fn multiclass_identity_predictions_score_one() {
    let truth = vec![0, 1, 2, 1, 0, 2];
    let m = multiclass_metrics(&truth, &truth, 3).unwrap();
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.macro_f1, 1.0);
}

#[test]
fn multiclass_all_middle_predictions_match_hand_values() {
    let truth = vec![0, 1, 2];
    let predicted = vec![1, 1, 1];
    let m = multiclass_metrics(&predicted, &truth, 3).unwrap();
    assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(m.per_class_f1[0], 0.0);
    assert!((m.per_class_f1[1] - 0.5).abs() < 1e-15);
    assert_eq!(m.per_class_f1[2], 0.0);
    assert!((m.macro_f1 - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn multiclass_metrics_are_permutation_invariant() {
    let truth: Vec<u8> = vec![0, 1, 2, 2, 1, 0, 1, 2];
    let predicted: Vec<u8> = vec![0, 2, 2, 1, 1, 0, 0, 2];
    let a = multiclass_metrics(&predicted, &truth, 3).unwrap();
    let perm = [3, 1, 4, 0, 7, 2, 6, 5];
    let truth_p: Vec<u8> = perm.iter().map(|&i| truth[i]).collect();
    let predicted_p: Vec<u8> = perm.iter().map(|&i| predicted[i]).collect();
    let b = multiclass_metrics(&predicted_p, &truth_p, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn confusion_row_sums_equal_class_supports() {
    let truth: Vec<u8> = vec![0, 0, 1, 2, 2, 2];
    let predicted: Vec<u8> = vec![1, 0, 1, 0, 2, 2];
    let m = multiclass_metrics(&predicted, &truth, 3).unwrap();
    for k in 0..3 {
        let support = truth.iter().filter(|&&t| t as usize == k).count();
        assert_eq!(m.confusion[k].iter().sum::<usize>(), support);
    }
    let trace: usize = (0..3).map(|k| m.confusion[k][k]).sum();
    assert!((m.accuracy - trace as f64 / 6.0).abs() < 1e-15);
}

#[test]
fn brier_identities() {
    assert_eq!(brier(&[1.0, 0.0], &[1, 0]).unwrap(), 0.0);
    assert_eq!(brier(&[0.5; 8], &[0, 1, 1, 0, 1, 0, 0, 1]).unwrap(), 0.25);

    // Constant p equal to prevalence: Brier = pi (1 - pi).
    let mut labels = vec![0u8; 100];
    for l in labels.iter_mut().take(27) {
        *l = 1;
    }
    let b = brier(&[0.27; 100], &labels).unwrap();
    assert!((b - 0.1971).abs() < 1e-12);
}

#[test]
fn out_of_range_probability_is_a_domain_error() {
    assert!(brier(&[1.2], &[1]).is_err());
    assert!(calibration_bins(&[-0.1], &[0]).is_err());
}

#[test]
fn calibration_bins_cover_all_rows_and_keep_frequencies_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let probabilities: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    let labels: Vec<u8> = probabilities
        .iter()
        .map(|&p| u8::from(rng.random::<f64>() < p))
        .collect();
    let curve = calibration_bins(&probabilities, &labels).unwrap();
    assert_eq!(curve.bins.len(), 10);
    assert_eq!(curve.bins.iter().map(|b| b.count).sum::<usize>(), 500);
    for bin in &curve.bins {
        if let Some(f) = bin.observed_frequency {
            assert!((0.0..=1.0).contains(&f));
        }
    }
    // p = 1.0 lands in the final bin.
    let edge = calibration_bins(&[1.0, 0.0], &[1, 0]).unwrap();
    assert_eq!(edge.bins[9].count, 1);
    assert_eq!(edge.bins[0].count, 1);
}

#[test]
fn default_split_produces_750_row_slices() {
    let data = generate_synthetic(&GeneratorConfig::default()).unwrap();
    let state = fit_transforms(
        &data,
        &FeatureRecipe::default(),
        &SplitSpec::default().train_rounds,
    )
    .unwrap();
    let matrix = apply_transforms(&state, &data).unwrap();
    let (train, validation, test) = temporal_split(&matrix, &SplitSpec::default()).unwrap();
    assert_eq!(train.n_rows(), 750);
    assert_eq!(validation.n_rows(), 750);
    assert_eq!(test.n_rows(), 750);

    // Union of key sets partitions the full key set; intersections empty.
    let mut all: Vec<(u32, u32)> = train
        .keys
        .iter()
        .chain(&validation.keys)
        .chain(&test.keys)
        .copied()
        .collect();
    all.sort_unstable();
    assert_eq!(all, matrix.keys);
}

#[test]
fn split_with_empty_test_rounds_is_allowed() {
    let data = generate_synthetic(&GeneratorConfig {
        n_households: 30,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let state = fit_transforms(
        &data,
        &FeatureRecipe::default(),
        &std::collections::BTreeSet::from([1, 2]),
    )
    .unwrap();
    let matrix = apply_transforms(&state, &data).unwrap();
    let spec = SplitSpec {
        train_rounds: [1, 2].into(),
        validation_rounds: [3].into(),
        test_rounds: [].into(),
    };
    let (train, validation, test) = temporal_split(&matrix, &spec).unwrap();
    assert_eq!(train.n_rows(), 60);
    assert_eq!(validation.n_rows(), 30);
    assert_eq!(test.n_rows(), 0);
}

#[test]
fn overlapping_or_unordered_splits_are_rejected() {
    let overlapping = SplitSpec {
        train_rounds: [1, 2].into(),
        validation_rounds: [2].into(),
        test_rounds: [3].into(),
    };
    assert!(overlapping.validate().is_err());

    let unordered = SplitSpec {
        train_rounds: [2].into(),
        validation_rounds: [1].into(),
        test_rounds: [3].into(),
    };
    assert!(unordered.validate().is_err());
}

#[test]
fn train_keys_never_leak_into_other_slices() {
    let data = generate_synthetic(&GeneratorConfig {
        n_households: 25,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let state = fit_transforms(
        &data,
        &FeatureRecipe::default(),
        &SplitSpec::default().train_rounds,
    )
    .unwrap();
    let matrix = apply_transforms(&state, &data).unwrap();
    let (train, validation, test) = temporal_split(&matrix, &SplitSpec::default()).unwrap();
    use std::collections::BTreeSet;
    let tr: BTreeSet<_> = train.keys.iter().collect();
    let va: BTreeSet<_> = validation.keys.iter().collect();
    let te: BTreeSet<_> = test.keys.iter().collect();
    assert!(tr.intersection(&va).next().is_none());
    assert!(tr.intersection(&te).next().is_none());
    assert!(va.intersection(&te).next().is_none());
}
