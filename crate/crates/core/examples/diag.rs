// Scratch diagnostics for generator/model tuning. Not part of the public
// surface.
use ews_core::eval::{pr_auc, roc_auc, temporal_split, SplitSpec};
use ews_core::features::{apply_transforms, fit_transforms, FeatureRecipe};
use ews_core::models::{
    train_forest, train_gbdt, train_logistic, train_tree, ForestConfig, GbdtConfig,
    LogisticConfig, TargetKind, TrainedModel, TreeConfig,
};
use ews_core::panel::{generate_synthetic, GeneratorConfig};
use ews_core::stress::{run_stress, ShockSpec};
use std::collections::BTreeSet;
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42);
    let t0 = Instant::now();
    let config = GeneratorConfig {
        seed,
        ..GeneratorConfig::default()
    };
    let data = generate_synthetic(&config).unwrap();
    let split = SplitSpec::default();
    let state = fit_transforms(&data, &FeatureRecipe::default(), &split.train_rounds).unwrap();
    let matrix = apply_transforms(&state, &data).unwrap();
    let (train, validation, test) = temporal_split(&matrix, &split).unwrap();
    println!("featurized in {:?} ({} cols)", t0.elapsed(), matrix.n_cols());

    let prevalence = validation
        .target_binary
        .iter()
        .map(|&y| f64::from(y))
        .sum::<f64>()
        / validation.n_rows() as f64;
    println!("validation prevalence: {prevalence:.4}");

    let t = Instant::now();
    let binary_models: Vec<(&str, TrainedModel)> = vec![
        (
            "logistic",
            TrainedModel::Logistic(
                train_logistic(&train, TargetKind::Binary, &LogisticConfig::default()).unwrap(),
            ),
        ),
        (
            "tree",
            TrainedModel::Tree(
                train_tree(&train, TargetKind::Binary, &TreeConfig::default()).unwrap(),
            ),
        ),
        (
            "forest",
            TrainedModel::Forest(
                train_forest(&train, TargetKind::Binary, &ForestConfig::default()).unwrap(),
            ),
        ),
        (
            "gbdt_depthwise",
            TrainedModel::Boosted(
                train_gbdt(&train, TargetKind::Binary, &GbdtConfig::default()).unwrap(),
            ),
        ),
        (
            "gbdt_leafwise",
            TrainedModel::Boosted(
                train_gbdt(&train, TargetKind::Binary, &GbdtConfig::leafwise_default()).unwrap(),
            ),
        ),
    ];
    println!("binary training in {:?}", t.elapsed());
    for (name, model) in &binary_models {
        for (tag, slice) in [("val", &validation), ("test", &test)] {
            let scores = model.binary_score(slice).unwrap();
            let roc = roc_auc(&scores, &slice.target_binary).unwrap();
            let pr = pr_auc(&scores, &slice.target_binary).unwrap();
            println!("{name:<16} {tag:<5} ROC-AUC {roc:.4}  PR-AUC {pr:.4}");
        }
    }

    let t = Instant::now();
    let rounds_override: u32 = std::env::var("GBDT_ROUNDS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(GbdtConfig::default().n_rounds);
    let lr_override: f64 = std::env::var("GBDT_LR")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(GbdtConfig::default().learning_rate);
    let sev_config = GbdtConfig {
        n_rounds: rounds_override,
        learning_rate: lr_override,
        ..GbdtConfig::default()
    };
    let sev_config_leaf = GbdtConfig {
        n_rounds: rounds_override,
        learning_rate: lr_override,
        ..GbdtConfig::leafwise_default()
    };
    let severity_models: Vec<(&str, TrainedModel)> = vec![
        (
            "tree",
            TrainedModel::Tree(
                train_tree(&train, TargetKind::Severity, &TreeConfig::default()).unwrap(),
            ),
        ),
        (
            "forest",
            TrainedModel::Forest(
                train_forest(&train, TargetKind::Severity, &ForestConfig::default()).unwrap(),
            ),
        ),
        (
            "gbdt_depthwise",
            TrainedModel::Boosted(
                train_gbdt(&train, TargetKind::Severity, &sev_config).unwrap(),
            ),
        ),
        (
            "gbdt_leafwise",
            TrainedModel::Boosted(
                train_gbdt(&train, TargetKind::Severity, &sev_config_leaf).unwrap(),
            ),
        ),
    ];
    println!("severity training in {:?}", t.elapsed());
    for (name, model) in &severity_models {
        for (tag, slice) in [("train", &train), ("val", &validation), ("test", &test)] {
            let predicted = model.predict_class(slice).unwrap();
            let correct = predicted
                .iter()
                .zip(&slice.target_severity)
                .filter(|(a, b)| a == b)
                .count();
            println!(
                "{name:<16} {tag:<5} accuracy {:.4}",
                correct as f64 / slice.n_rows() as f64
            );
        }
    }

    // Stress: boosted binary + boosted severity under the default shock.
    let t = Instant::now();
    let rounds: BTreeSet<u32> = split.validation_rounds.clone();
    let binary_stress = run_stress(
        &binary_models[3].1,
        &data,
        &rounds,
        &ShockSpec::default(),
        &state,
    )
    .unwrap();
    println!("binary stress deltas: {:?}", binary_stress.deltas);
    let severity_stress = run_stress(
        &severity_models[2].1,
        &data,
        &rounds,
        &ShockSpec::default(),
        &state,
    )
    .unwrap();
    println!("severity stress deltas: {:?}", severity_stress.deltas);
    println!("stress in {:?}", t.elapsed());
    println!("total {:?}", t0.elapsed());
}
