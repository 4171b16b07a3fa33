//! Config-driven pipeline stages producing deterministic file artifacts,
//! chained through a manifest that records outputs with content hashes.

mod report;

pub use report::render_report;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{
    binary_metrics, calibration_bins, multiclass_metrics, roc_auc, temporal_split,
    BinaryEvaluation, CalibrationBlock, EvaluationReport, MultiClassEvaluation,
    EVALUATION_SCHEMA_VERSION,
};
use crate::explain::{
    ensemble_shap, global_importance, linear_shap, render_narrative, Narrative, ShapAttribution,
};
use crate::features::{
    apply_transforms, fit_transforms, read_feature_csv, write_feature_csv, FeatureMatrix,
    TransformState,
};
use crate::models::{
    apply_platt, fit_platt, load_model, save_model, train_forest, train_gbdt, train_logistic,
    train_tree, TargetKind, TrainedModel,
};
use crate::panel::{generate_synthetic, read_panel_csv, summarize, write_panel_csv, PanelDataset};
use crate::stress::{apply_shock, drift_check_between, run_stress, DriftReport, StressReport};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_SCHEMA_VERSION: &str = "manifest-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Logical name stages use to look the artifact up.
    pub name: String,
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_ms: u64,
    pub outputs: Vec<ArtifactRecord>,
}

/// Run ledger: config hash, per-stage artifacts and timings, format
/// versions. Rewritten after every successful stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub config_hash: String,
    pub format_versions: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    fn new(config_hash: String) -> RunManifest {
        RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION.to_string(),
            config_hash,
            format_versions: BTreeMap::from([
                (
                    "panel".to_string(),
                    crate::panel::PANEL_SCHEMA_VERSION.to_string(),
                ),
                (
                    "model".to_string(),
                    crate::models::MODEL_FORMAT_VERSION.to_string(),
                ),
                (
                    "evaluation".to_string(),
                    EVALUATION_SCHEMA_VERSION.to_string(),
                ),
            ]),
            stages: BTreeMap::new(),
        }
    }
}

/// One pipeline run rooted at an output directory.
pub struct Run {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    manifest: RunManifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    /// Open (or start) a run in `out_dir`. An existing manifest must match
    /// the config hash; otherwise the artifacts belong to a different
    /// configuration.
    pub fn open(config: PipelineConfig, out_dir: &Path) -> Result<Run> {
        config.validate()?;
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let manifest_path = out_dir.join("manifest.json");
        let config_hash = config.hash();
        let manifest = if manifest_path.exists() {
            let text = std::fs::read_to_string(&manifest_path)
                .map_err(|e| Error::io(&manifest_path, e))?;
            let manifest: RunManifest = serde_json::from_str(&text)
                .map_err(|e| Error::Integrity(format!("corrupt manifest.json: {e}")))?;
            if manifest.config_hash != config_hash {
                return Err(Error::Config(format!(
                    "output directory {} was produced with a different config (hash {} vs {}); \
                     use a fresh --out directory",
                    out_dir.display(),
                    manifest.config_hash,
                    config_hash
                )));
            }
            manifest
        } else {
            RunManifest::new(config_hash)
        };
        Ok(Run {
            config,
            out_dir: out_dir.to_path_buf(),
            manifest,
        })
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn write_artifact(
        &self,
        records: &mut Vec<ArtifactRecord>,
        name: &str,
        relative: &str,
        bytes: &[u8],
    ) -> Result<PathBuf> {
        let path = self.out_dir.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        records.push(ArtifactRecord {
            name: name.to_string(),
            path: relative.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    fn finish_stage(
        &mut self,
        stage: &str,
        started: Instant,
        outputs: Vec<ArtifactRecord>,
    ) -> Result<()> {
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord {
                wall_ms: started.elapsed().as_millis() as u64,
                outputs,
            },
        );
        let path = self.out_dir.join("manifest.json");
        let mut text =
            serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Absolute path of a prior stage's artifact, or a staged-dependency
    /// error naming what is missing.
    pub fn require(&self, stage: &str, name: &str) -> Result<PathBuf> {
        let record = self
            .manifest
            .stages
            .get(stage)
            .and_then(|s| s.outputs.iter().find(|a| a.name == name))
            .ok_or_else(|| Error::StagedDependency {
                path: self.out_dir.join(format!("<{stage}:{name}>")),
                detail: format!("run `ews {stage}` first to produce '{name}'"),
            })?;
        let path = self.out_dir.join(&record.path);
        if !path.exists() {
            return Err(Error::StagedDependency {
                path,
                detail: format!("artifact '{name}' listed in the manifest is gone"),
            });
        }
        Ok(path)
    }

    // ----- stages -------------------------------------------------------

    /// Generate the synthetic panel and its EDA summary.
    pub fn cmd_generate(&mut self) -> Result<()> {
        let started = Instant::now();
        let data = generate_synthetic(&self.config.generator)?;
        let eda = summarize(&data)?;
        let mut outputs = Vec::new();
        self.write_artifact(
            &mut outputs,
            "panel",
            "panel.csv",
            crate::panel::write_panel_csv_string(&data).as_bytes(),
        )?;
        let mut eda_json = serde_json::to_string_pretty(&eda).expect("eda serializes");
        eda_json.push('\n');
        self.write_artifact(&mut outputs, "eda", "eda_summary.json", eda_json.as_bytes())?;
        self.finish_stage("generate", started, outputs)
    }

    fn load_panel(&self) -> Result<PanelDataset> {
        let path = self.require("generate", "panel")?;
        read_panel_csv(&path)
    }

    /// Fit transforms on the training rounds and emit the three split
    /// feature files plus the frozen transform state.
    pub fn cmd_featurize(&mut self) -> Result<()> {
        let started = Instant::now();
        let data = self.load_panel()?;
        let state = fit_transforms(&data, &self.config.recipe, &self.config.split.train_rounds)?;
        let matrix = apply_transforms(&state, &data)?;
        let (train, validation, test) = temporal_split(&matrix, &self.config.split)?;

        let mut outputs = Vec::new();
        for (name, slice) in [
            ("features_train", &train),
            ("features_validation", &validation),
            ("features_test", &test),
        ] {
            self.write_artifact(
                &mut outputs,
                name,
                &format!("{name}.csv"),
                crate::features::write_feature_csv_string(slice).as_bytes(),
            )?;
        }
        let mut state_json = serde_json::to_string_pretty(&state).expect("state serializes");
        state_json.push('\n');
        self.write_artifact(
            &mut outputs,
            "transform_state",
            "transform_state.json",
            state_json.as_bytes(),
        )?;
        self.finish_stage("featurize", started, outputs)
    }

    fn load_transform_state(&self) -> Result<TransformState> {
        let path = self.require("featurize", "transform_state")?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Integrity(format!("corrupt transform state: {e}")))
    }

    fn load_features(&self, name: &str) -> Result<FeatureMatrix> {
        let path = self.require("featurize", name)?;
        read_feature_csv(&path)
    }

    /// All model families for both tasks, persisted under content-hashed
    /// filenames.
    pub fn cmd_train(&mut self) -> Result<()> {
        let started = Instant::now();
        let train = self.load_features("features_train")?;
        let models = self.config.models.clone();
        let trained: Vec<(String, TrainedModel)> = vec![
            (
                "binary_logistic".to_string(),
                TrainedModel::Logistic(train_logistic(
                    &train,
                    TargetKind::Binary,
                    &models.logistic,
                )?),
            ),
            (
                "binary_tree".to_string(),
                TrainedModel::Tree(train_tree(&train, TargetKind::Binary, &models.tree)?),
            ),
            (
                "binary_forest".to_string(),
                TrainedModel::Forest(train_forest(&train, TargetKind::Binary, &models.forest)?),
            ),
            (
                "binary_gbdt_depthwise".to_string(),
                TrainedModel::Boosted(train_gbdt(
                    &train,
                    TargetKind::Binary,
                    &models.gbdt_depthwise,
                )?),
            ),
            (
                "binary_gbdt_leafwise".to_string(),
                TrainedModel::Boosted(train_gbdt(
                    &train,
                    TargetKind::Binary,
                    &models.gbdt_leafwise,
                )?),
            ),
            (
                "severity_tree".to_string(),
                TrainedModel::Tree(train_tree(&train, TargetKind::Severity, &models.tree)?),
            ),
            (
                "severity_forest".to_string(),
                TrainedModel::Forest(train_forest(
                    &train,
                    TargetKind::Severity,
                    &models.forest,
                )?),
            ),
            (
                "severity_gbdt_depthwise".to_string(),
                TrainedModel::Boosted(train_gbdt(
                    &train,
                    TargetKind::Severity,
                    &models.gbdt_depthwise,
                )?),
            ),
            (
                "severity_gbdt_leafwise".to_string(),
                TrainedModel::Boosted(train_gbdt(
                    &train,
                    TargetKind::Severity,
                    &models.gbdt_leafwise,
                )?),
            ),
        ];

        let mut outputs = Vec::new();
        for (name, model) in &trained {
            let json = crate::models::model_to_json(model);
            let hash = sha256_hex(json.as_bytes());
            let relative = format!("models/{name}-{}.json", &hash[..12]);
            self.write_artifact(&mut outputs, name, &relative, json.as_bytes())?;
        }
        self.finish_stage("train", started, outputs)
    }

    fn load_trained(&self, name: &str) -> Result<TrainedModel> {
        let path = self.require("train", name)?;
        load_model(&path)
    }

    pub const BINARY_MODELS: [&'static str; 5] = [
        "binary_logistic",
        "binary_tree",
        "binary_forest",
        "binary_gbdt_depthwise",
        "binary_gbdt_leafwise",
    ];
    pub const SEVERITY_MODELS: [&'static str; 4] = [
        "severity_tree",
        "severity_forest",
        "severity_gbdt_depthwise",
        "severity_gbdt_leafwise",
    ];

    /// Metrics for every model on validation (and test when present),
    /// including Platt calibration fitted on validation margins.
    pub fn cmd_evaluate(&mut self) -> Result<()> {
        let started = Instant::now();
        let validation = self.load_features("features_validation")?;
        let test = self.load_features("features_test")?;

        let mut binary = BTreeMap::new();
        for name in Self::BINARY_MODELS {
            let model = self.load_trained(name)?;
            let family = name.trim_start_matches("binary_").to_string();
            binary.insert(family, self.evaluate_binary(&model, &validation, &test)?);
        }
        let mut severity = BTreeMap::new();
        for name in Self::SEVERITY_MODELS {
            let model = self.load_trained(name)?;
            let family = name.trim_start_matches("severity_").to_string();
            severity.insert(family, evaluate_severity(&model, &validation, &test)?);
        }

        let report = EvaluationReport {
            schema_version: EVALUATION_SCHEMA_VERSION.to_string(),
            config_hash: self.config.hash(),
            split: self.config.split.clone(),
            binary,
            severity,
        };
        let mut outputs = Vec::new();
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        self.write_artifact(
            &mut outputs,
            "evaluation",
            "evaluation_report.json",
            json.as_bytes(),
        )?;
        self.finish_stage("evaluate", started, outputs)
    }

    fn evaluate_binary(
        &self,
        model: &TrainedModel,
        validation: &FeatureMatrix,
        test: &FeatureMatrix,
    ) -> Result<BinaryEvaluation> {
        let scores = model.binary_score(validation)?;
        let probabilities: Vec<f64> = model
            .probabilities(validation)?
            .into_iter()
            .map(|p| p[1])
            .collect();
        let metrics = binary_metrics(&scores, &probabilities, &validation.target_binary)?;

        let calibrator = fit_platt(&scores, &validation.target_binary)?;
        let calibrated = apply_platt(&calibrator, &scores);
        let calibration = CalibrationBlock {
            platt_a: calibrator.a,
            platt_b: calibrator.b,
            raw_brier: crate::eval::brier(&probabilities, &validation.target_binary)?,
            calibrated_brier: crate::eval::brier(&calibrated, &validation.target_binary)?,
            raw_roc_auc: metrics.roc_auc,
            calibrated_roc_auc: roc_auc(&calibrated, &validation.target_binary)?,
            raw_curve: calibration_bins(&probabilities, &validation.target_binary)?,
            calibrated_curve: calibration_bins(&calibrated, &validation.target_binary)?,
        };

        let test_metrics = if test.n_rows() > 0 {
            let scores = model.binary_score(test)?;
            let probabilities: Vec<f64> = model
                .probabilities(test)?
                .into_iter()
                .map(|p| p[1])
                .collect();
            Some(binary_metrics(&scores, &probabilities, &test.target_binary)?)
        } else {
            None
        };

        Ok(BinaryEvaluation {
            validation: metrics,
            test: test_metrics,
            calibration,
        })
    }

    /// Attributions, global importance, and narratives for the boosted
    /// models on the validation slice.
    pub fn cmd_explain(&mut self) -> Result<()> {
        let started = Instant::now();
        let validation = self.load_features("features_validation")?;
        let binary_model = self.load_trained("binary_gbdt_depthwise")?;
        let severity_model = self.load_trained("severity_gbdt_depthwise")?;

        let binary_attrs = ensemble_shap(&binary_model, &validation, None)?;
        let severity_attrs = ensemble_shap(&severity_model, &validation, None)?;
        let binary_importance = global_importance(&binary_attrs, binary_model.feature_names())?;
        let severity_importance =
            global_importance(&severity_attrs, severity_model.feature_names())?;

        let mut outputs = Vec::new();
        self.write_artifact(
            &mut outputs,
            "attributions_binary",
            "explain/attributions_binary.csv",
            attribution_csv(&binary_attrs, binary_model.feature_names()).as_bytes(),
        )?;
        self.write_artifact(
            &mut outputs,
            "attributions_severity",
            "explain/attributions_severity.csv",
            attribution_csv(&severity_attrs, severity_model.feature_names()).as_bytes(),
        )?;
        for (name, relative, importance) in [
            (
                "importance_binary",
                "explain/importance_binary.json",
                &binary_importance,
            ),
            (
                "importance_severity",
                "explain/importance_severity.json",
                &severity_importance,
            ),
        ] {
            let mut json = serde_json::to_string_pretty(importance).expect("serializes");
            json.push('\n');
            self.write_artifact(&mut outputs, name, relative, json.as_bytes())?;
        }

        let narratives = self.render_narratives(&binary_model, &validation, &binary_attrs)?;
        self.write_artifact(
            &mut outputs,
            "narratives",
            "explain/narratives.txt",
            narratives.as_bytes(),
        )?;
        self.finish_stage("explain", started, outputs)
    }

    fn render_narratives(
        &self,
        model: &TrainedModel,
        validation: &FeatureMatrix,
        attrs: &[ShapAttribution],
    ) -> Result<String> {
        let probabilities: Vec<f64> = model
            .probabilities(validation)?
            .into_iter()
            .map(|p| p[1])
            .collect();
        let mut order: Vec<usize> = (0..validation.n_rows()).collect();
        order.sort_by(|&a, &b| {
            probabilities[b]
                .partial_cmp(&probabilities[a])
                .unwrap()
                .then(validation.keys[a].cmp(&validation.keys[b]))
        });
        let k = self.config.report.narrative_households.min(order.len());
        let names = model.feature_names();

        let mut text = String::new();
        let mut section = |title: &str, rows: &[usize], text: &mut String| {
            text.push_str(title);
            text.push('\n');
            for &i in rows {
                let narrative: Narrative =
                    render_narrative(&attrs[i], names, validation.row(i), self.config.report.top_k_factors);
                let (household, round) = validation.keys[i];
                text.push_str(&format!(
                    "household {household}, round {round}: p(distress) = {:.3}, leaning {}\n",
                    probabilities[i],
                    match narrative.direction {
                        crate::explain::Direction::TowardDistress => "toward distress",
                        crate::explain::Direction::TowardStability => "toward stability",
                    }
                ));
                for factor in &narrative.top_factors {
                    text.push_str("  - ");
                    text.push_str(&factor.phrase);
                    text.push('\n');
                }
            }
            text.push('\n');
        };
        section("Highest predicted distress risk", &order[..k], &mut text);
        let tail: Vec<usize> = order[order.len() - k..].iter().rev().copied().collect();
        section("Most stable households", &tail, &mut text);
        Ok(text)
    }

    /// Shock re-evaluation of the boosted models plus drift reports.
    pub fn cmd_stress(&mut self) -> Result<()> {
        let started = Instant::now();
        let data = self.load_panel()?;
        let state = self.load_transform_state()?;
        let rounds = self.config.split.validation_rounds.clone();

        let binary_model = self.load_trained("binary_gbdt_depthwise")?;
        let severity_model = self.load_trained("severity_gbdt_depthwise")?;
        let binary_stress = run_stress(&binary_model, &data, &rounds, &self.config.shock, &state)?;
        let severity_stress =
            run_stress(&severity_model, &data, &rounds, &self.config.shock, &state)?;

        let shocked = apply_shock(&data, &rounds, &self.config.shock, &state)?;
        let drift_validation = drift_check_between(
            &data,
            &data,
            &self.config.split.train_rounds,
            &rounds,
            self.config.report.drift_threshold,
        )?;
        let drift_shocked = drift_check_between(
            &data,
            &shocked,
            &self.config.split.train_rounds,
            &rounds,
            self.config.report.drift_threshold,
        )?;

        let mut outputs = Vec::new();
        let mut stress_json = serde_json::to_string_pretty(&StressBundle {
            binary: binary_stress,
            severity: severity_stress,
        })
        .expect("serializes");
        stress_json.push('\n');
        self.write_artifact(
            &mut outputs,
            "stress",
            "stress_report.json",
            stress_json.as_bytes(),
        )?;
        let mut drift_json = serde_json::to_string_pretty(&DriftBundle {
            validation: drift_validation,
            shocked_validation: drift_shocked,
        })
        .expect("serializes");
        drift_json.push('\n');
        self.write_artifact(
            &mut outputs,
            "drift",
            "drift_report.json",
            drift_json.as_bytes(),
        )?;
        self.finish_stage("stress", started, outputs)
    }

    /// Static report rendered from the serialized artifacts only.
    pub fn cmd_report(&mut self) -> Result<()> {
        let started = Instant::now();
        let inputs = report::ReportInputs::load(self)?;
        let files = report::render_report(&inputs, &self.config)?;
        let mut outputs = Vec::new();
        for (name, relative, bytes) in files {
            self.write_artifact(&mut outputs, &name, &relative, &bytes)?;
        }
        self.finish_stage("report", started, outputs)
    }

    /// Every stage in order.
    pub fn cmd_run_all(&mut self) -> Result<()> {
        self.cmd_generate()?;
        self.cmd_featurize()?;
        self.cmd_train()?;
        self.cmd_evaluate()?;
        self.cmd_explain()?;
        self.cmd_stress()?;
        self.cmd_report()
    }
}

fn evaluate_severity(
    model: &TrainedModel,
    validation: &FeatureMatrix,
    test: &FeatureMatrix,
) -> Result<MultiClassEvaluation> {
    let predicted = model.predict_class(validation)?;
    let metrics = multiclass_metrics(&predicted, &validation.target_severity, 3)?;
    let test_metrics = if test.n_rows() > 0 {
        let predicted = model.predict_class(test)?;
        Some(multiclass_metrics(&predicted, &test.target_severity, 3)?)
    } else {
        None
    };
    Ok(MultiClassEvaluation {
        validation: metrics,
        test: test_metrics,
    })
}

/// Attribution CSV: key, base value, predicted margin, one column per
/// feature contribution.
fn attribution_csv(attrs: &[ShapAttribution], feature_names: &[String]) -> String {
    let mut out = String::from("household_id,round,base_value,predicted_margin");
    for name in feature_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for attr in attrs {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}",
            attr.key.0, attr.key.1, attr.base_value, attr.predicted_margin
        ));
        for c in &attr.contributions {
            out.push_str(&format!(",{c:.6}"));
        }
        out.push('\n');
    }
    out
}

/// Background means of the training slice, for linear SHAP.
pub fn training_feature_means(train: &FeatureMatrix) -> Vec<f64> {
    let n = train.n_rows() as f64;
    let mut means = vec![0.0; train.n_cols()];
    for i in 0..train.n_rows() {
        for (m, v) in means.iter_mut().zip(train.row(i)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    means
}

/// Convenience used by tests and diagnostics: explain a logistic model over
/// a slice with training-mean background.
pub fn logistic_attributions(
    model: &crate::models::LinearModel,
    slice: &FeatureMatrix,
    background: &[f64],
) -> Result<Vec<ShapAttribution>> {
    (0..slice.n_rows())
        .map(|i| linear_shap(model, slice.row(i), slice.keys[i], background))
        .collect()
}

/// Stress artifacts for both tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressBundle {
    pub binary: StressReport,
    pub severity: StressReport,
}

/// Drift against the raw validation slice and its shocked copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBundle {
    pub validation: DriftReport,
    pub shocked_validation: DriftReport,
}

pub(crate) use report::ReportInputs;
