//! Static report: one self-contained HTML page plus CSV tables and
//! pre-rendered bar-chart JSON series, all derived from the serialized
//! stage artifacts without recomputation.

use super::{DriftBundle, Run, StressBundle};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::EvaluationReport;
use crate::explain::GlobalImportance;
use crate::panel::EdaSummary;
use crate::stress::StressMetrics;
use serde::Serialize;

pub(crate) struct ReportInputs {
    pub eda: EdaSummary,
    pub evaluation: EvaluationReport,
    pub stress: StressBundle,
    pub drift: DriftBundle,
    pub importance_binary: GlobalImportance,
    pub importance_severity: GlobalImportance,
    pub narratives: String,
}

fn read_json<T: serde::de::DeserializeOwned>(run: &Run, stage: &str, name: &str) -> Result<T> {
    let path = run.require(stage, name)?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Integrity(format!("corrupt artifact {name}: {e}")))
}

impl ReportInputs {
    pub fn load(run: &Run) -> Result<ReportInputs> {
        let narratives_path = run.require("explain", "narratives")?;
        let narratives = std::fs::read_to_string(&narratives_path)
            .map_err(|e| Error::io(&narratives_path, e))?;
        Ok(ReportInputs {
            eda: read_json(run, "generate", "eda")?,
            evaluation: read_json(run, "evaluate", "evaluation")?,
            stress: read_json(run, "stress", "stress")?,
            drift: read_json(run, "stress", "drift")?,
            importance_binary: read_json(run, "explain", "importance_binary")?,
            importance_severity: read_json(run, "explain", "importance_severity")?,
            narratives,
        })
    }
}

type ReportFile = (String, String, Vec<u8>);

fn push_file(files: &mut Vec<ReportFile>, name: &str, relative: &str, content: String) {
    files.push((name.to_string(), relative.to_string(), content.into_bytes()));
}

#[derive(Serialize)]
struct BarSeries<'a> {
    title: &'a str,
    labels: Vec<String>,
    values: Vec<f64>,
}

fn bar_chart_json(title: &str, pairs: &[(String, f64)]) -> String {
    let series = BarSeries {
        title,
        labels: pairs.iter().map(|(l, _)| l.clone()).collect(),
        values: pairs.iter().map(|(_, v)| *v).collect(),
    };
    let mut out = serde_json::to_string_pretty(&series).expect("serializes");
    out.push('\n');
    out
}

fn html_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn html_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::from("<table>\n<tr>");
    for h in headers {
        out.push_str(&format!("<th>{}</th>", html_escape(h)));
    }
    out.push_str("</tr>\n");
    for row in rows {
        out.push_str("<tr>");
        for cell in row {
            out.push_str(&format!("<td>{}</td>", html_escape(cell)));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
    out
}

fn csv_from(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = headers.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Render all report files: (logical name, relative path, bytes).
pub fn render_report(
    inputs: &ReportInputs,
    config: &PipelineConfig,
) -> Result<Vec<ReportFile>> {
    let mut files = Vec::new();
    let f4 = |v: f64| format!("{v:.4}");

    // Binary metric tables (validation mirrors the headline layout:
    // five models by ROC-AUC / PR-AUC).
    let binary_rows: Vec<Vec<String>> = inputs
        .evaluation
        .binary
        .iter()
        .map(|(name, eval)| {
            vec![
                name.clone(),
                f4(eval.validation.roc_auc),
                f4(eval.validation.pr_auc),
                f4(eval.validation.brier),
                f4(eval.validation.log_loss),
            ]
        })
        .collect();
    let binary_headers = ["model", "roc_auc", "pr_auc", "brier", "log_loss"];
    push_file(
        &mut files,
        "table_binary_validation",
        "report/tables/binary_validation.csv",
        csv_from(&binary_headers, &binary_rows),
    );

    let binary_test_rows: Vec<Vec<String>> = inputs
        .evaluation
        .binary
        .iter()
        .filter_map(|(name, eval)| {
            eval.test.as_ref().map(|t| {
                vec![
                    name.clone(),
                    f4(t.roc_auc),
                    f4(t.pr_auc),
                    f4(t.brier),
                    f4(t.log_loss),
                ]
            })
        })
        .collect();
    if !binary_test_rows.is_empty() {
        push_file(
            &mut files,
            "table_binary_test",
            "report/tables/binary_test.csv",
            csv_from(&binary_headers, &binary_test_rows),
        );
    }

    // Severity accuracy table (four models).
    let severity_headers = ["model", "accuracy", "macro_f1"];
    let severity_rows: Vec<Vec<String>> = inputs
        .evaluation
        .severity
        .iter()
        .map(|(name, eval)| {
            vec![
                name.clone(),
                f4(eval.validation.accuracy),
                f4(eval.validation.macro_f1),
            ]
        })
        .collect();
    push_file(
        &mut files,
        "table_severity_validation",
        "report/tables/severity_validation.csv",
        csv_from(&severity_headers, &severity_rows),
    );
    let severity_test_rows: Vec<Vec<String>> = inputs
        .evaluation
        .severity
        .iter()
        .filter_map(|(name, eval)| {
            eval.test
                .as_ref()
                .map(|t| vec![name.clone(), f4(t.accuracy), f4(t.macro_f1)])
        })
        .collect();
    if !severity_test_rows.is_empty() {
        push_file(
            &mut files,
            "table_severity_test",
            "report/tables/severity_test.csv",
            csv_from(&severity_headers, &severity_test_rows),
        );
    }

    // Calibration summary.
    let calibration_rows: Vec<Vec<String>> = inputs
        .evaluation
        .binary
        .iter()
        .map(|(name, eval)| {
            let c = &eval.calibration;
            vec![
                name.clone(),
                format!("{:.6}", c.platt_a),
                format!("{:.6}", c.platt_b),
                f4(c.raw_brier),
                f4(c.calibrated_brier),
                f4(c.raw_roc_auc),
                f4(c.calibrated_roc_auc),
            ]
        })
        .collect();
    push_file(
        &mut files,
        "table_calibration",
        "report/tables/calibration.csv",
        csv_from(
            &[
                "model",
                "platt_a",
                "platt_b",
                "raw_brier",
                "calibrated_brier",
                "raw_roc_auc",
                "calibrated_roc_auc",
            ],
            &calibration_rows,
        ),
    );

    // EDA tables.
    let eda_rows: Vec<Vec<String>> = inputs
        .eda
        .numeric
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                f4(s.mean),
                f4(s.sd),
                f4(s.skewness),
                f4(s.min),
                f4(s.max),
            ]
        })
        .collect();
    push_file(
        &mut files,
        "table_eda_numeric",
        "report/tables/eda_numeric.csv",
        csv_from(&["column", "mean", "sd", "skewness", "min", "max"], &eda_rows),
    );
    let mut categorical_rows = Vec::new();
    for summary in &inputs.eda.categorical {
        for (level, count) in &summary.counts {
            categorical_rows.push(vec![
                summary.name.clone(),
                level.clone(),
                count.to_string(),
            ]);
        }
    }
    push_file(
        &mut files,
        "table_eda_categorical",
        "report/tables/eda_categorical.csv",
        csv_from(&["column", "level", "count"], &categorical_rows),
    );

    // Importance tables + chart series.
    for (tag, importance) in [
        ("binary", &inputs.importance_binary),
        ("severity", &inputs.importance_severity),
    ] {
        let rows: Vec<Vec<String>> = importance
            .ranking
            .iter()
            .enumerate()
            .map(|(rank, (feature, value))| {
                vec![(rank + 1).to_string(), feature.clone(), format!("{value:.6}")]
            })
            .collect();
        push_file(
            &mut files,
            &format!("table_importance_{tag}"),
            &format!("report/tables/importance_{tag}.csv"),
            csv_from(&["rank", "feature", "mean_abs_contribution"], &rows),
        );
        let top: Vec<(String, f64)> = importance.ranking.iter().take(15).cloned().collect();
        push_file(
            &mut files,
            &format!("chart_importance_{tag}"),
            &format!("report/charts/importance_{tag}.json"),
            bar_chart_json(&format!("Mean |contribution| ({tag} model)"), &top),
        );
    }

    // Metric comparison chart series.
    let roc_pairs: Vec<(String, f64)> = inputs
        .evaluation
        .binary
        .iter()
        .map(|(n, e)| (n.clone(), e.validation.roc_auc))
        .collect();
    push_file(
        &mut files,
        "chart_binary_roc",
        "report/charts/binary_roc_auc.json",
        bar_chart_json("Validation ROC-AUC", &roc_pairs),
    );
    let pr_pairs: Vec<(String, f64)> = inputs
        .evaluation
        .binary
        .iter()
        .map(|(n, e)| (n.clone(), e.validation.pr_auc))
        .collect();
    push_file(
        &mut files,
        "chart_binary_pr",
        "report/charts/binary_pr_auc.json",
        bar_chart_json("Validation PR-AUC", &pr_pairs),
    );
    let acc_pairs: Vec<(String, f64)> = inputs
        .evaluation
        .severity
        .iter()
        .map(|(n, e)| (n.clone(), e.validation.accuracy))
        .collect();
    push_file(
        &mut files,
        "chart_severity_accuracy",
        "report/charts/severity_accuracy.json",
        bar_chart_json("Validation accuracy (severity)", &acc_pairs),
    );

    // Calibration curves (raw) per model as chart data.
    #[derive(Serialize)]
    struct CurvePoint {
        mean_predicted: f64,
        observed_frequency: f64,
        count: usize,
    }
    #[derive(Serialize)]
    struct Curves {
        model: String,
        raw: Vec<CurvePoint>,
        calibrated: Vec<CurvePoint>,
    }
    let curves: Vec<Curves> = inputs
        .evaluation
        .binary
        .iter()
        .map(|(name, eval)| {
            let points = |curve: &crate::eval::CalibrationCurve| {
                curve
                    .bins
                    .iter()
                    .filter_map(|b| {
                        Some(CurvePoint {
                            mean_predicted: b.mean_predicted?,
                            observed_frequency: b.observed_frequency?,
                            count: b.count,
                        })
                    })
                    .collect::<Vec<_>>()
            };
            Curves {
                model: name.clone(),
                raw: points(&eval.calibration.raw_curve),
                calibrated: points(&eval.calibration.calibrated_curve),
            }
        })
        .collect();
    let mut curves_json = serde_json::to_string_pretty(&curves).expect("serializes");
    curves_json.push('\n');
    files.push((
        "chart_calibration".to_string(),
        "report/charts/calibration_curves.json".to_string(),
        curves_json.into_bytes(),
    ));

    // EDA histograms as chart data.
    #[derive(Serialize)]
    struct Histogram {
        column: String,
        lo: Vec<f64>,
        hi: Vec<f64>,
        counts: Vec<usize>,
    }
    let histograms: Vec<Histogram> = inputs
        .eda
        .numeric
        .iter()
        .map(|s| Histogram {
            column: s.name.clone(),
            lo: s.histogram.iter().map(|b| b.lo).collect(),
            hi: s.histogram.iter().map(|b| b.hi).collect(),
            counts: s.histogram.iter().map(|b| b.count).collect(),
        })
        .collect();
    let mut hist_json = serde_json::to_string_pretty(&histograms).expect("serializes");
    hist_json.push('\n');
    files.push((
        "chart_eda_histograms".to_string(),
        "report/charts/eda_histograms.json".to_string(),
        hist_json.into_bytes(),
    ));

    // Stress table.
    let mut stress_rows: Vec<Vec<String>> = Vec::new();
    let mut add_stress = |task: &str, report: &crate::stress::StressReport| {
        let (original, shocked): (Vec<(&str, f64)>, Vec<(&str, f64)>) =
            match (&report.original, &report.shocked) {
                (StressMetrics::Binary(o), StressMetrics::Binary(s)) => (
                    vec![("roc_auc", o.roc_auc), ("pr_auc", o.pr_auc), ("brier", o.brier)],
                    vec![("roc_auc", s.roc_auc), ("pr_auc", s.pr_auc), ("brier", s.brier)],
                ),
                (StressMetrics::MultiClass(o), StressMetrics::MultiClass(s)) => (
                    vec![("accuracy", o.accuracy), ("macro_f1", o.macro_f1)],
                    vec![("accuracy", s.accuracy), ("macro_f1", s.macro_f1)],
                ),
                _ => (vec![], vec![]),
            };
        for ((metric, o), (_, s)) in original.iter().zip(&shocked) {
            stress_rows.push(vec![
                task.to_string(),
                metric.to_string(),
                f4(*o),
                f4(*s),
                f4(s - o),
            ]);
        }
    };
    add_stress("binary", &inputs.stress.binary);
    add_stress("severity", &inputs.stress.severity);
    push_file(
        &mut files,
        "table_stress",
        "report/tables/stress.csv",
        csv_from(&["task", "metric", "original", "shocked", "delta"], &stress_rows),
    );

    // Drift table.
    let drift_rows: Vec<Vec<String>> = inputs
        .drift
        .validation
        .psi
        .iter()
        .map(|(feature, value)| {
            let shocked = inputs
                .drift
                .shocked_validation
                .psi
                .get(feature)
                .copied()
                .unwrap_or(f64::NAN);
            vec![
                feature.clone(),
                format!("{value:.6}"),
                format!("{shocked:.6}"),
                inputs
                    .drift
                    .shocked_validation
                    .flagged_features
                    .contains(feature)
                    .to_string(),
            ]
        })
        .collect();
    push_file(
        &mut files,
        "table_drift",
        "report/tables/drift.csv",
        csv_from(
            &["feature", "psi_validation", "psi_shocked_validation", "flagged_after_shock"],
            &drift_rows,
        ),
    );

    // The page itself.
    let html = render_index(inputs, config, &binary_rows, &severity_rows, &stress_rows);
    files.push((
        "index".to_string(),
        "report/index.html".to_string(),
        html.into_bytes(),
    ));
    Ok(files)
}

fn render_index(
    inputs: &ReportInputs,
    config: &PipelineConfig,
    binary_rows: &[Vec<String>],
    severity_rows: &[Vec<String>],
    stress_rows: &[Vec<String>],
) -> String {
    let mut html = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n\
         <title>Household financial distress early-warning report</title>\n<style>\n\
         body { font-family: sans-serif; margin: 2em auto; max-width: 70em; color: #222; }\n\
         h1 { border-bottom: 2px solid #444; padding-bottom: 0.2em; }\n\
         h2 { margin-top: 2em; color: #333; }\n\
         table { border-collapse: collapse; margin: 1em 0; }\n\
         th, td { border: 1px solid #bbb; padding: 0.3em 0.8em; text-align: right; }\n\
         th { background: #eee; }\n\
         td:first-child, th:first-child { text-align: left; }\n\
         pre { background: #f6f6f6; padding: 1em; overflow-x: auto; }\n\
         .note { color: #555; font-size: 0.9em; }\n</style>\n</head>\n<body>\n",
    );
    html.push_str("<h1>Household financial distress early-warning report</h1>\n");
    html.push_str(&format!(
        "<p class=\"note\">Run hash {} &middot; {} households &middot; rounds {:?} &middot; \
         classification threshold {}</p>\n",
        &inputs.evaluation.config_hash[..12],
        inputs.eda.n_households,
        inputs.eda.rounds,
        config.report.threshold
    ));

    html.push_str("<h2>Dataset overview</h2>\n");
    html.push_str(&format!(
        "<p>{} records. Distress prevalence and class balance below; full numeric summaries in \
         <code>tables/eda_numeric.csv</code>, histogram series in \
         <code>charts/eda_histograms.json</code>.</p>\n",
        inputs.eda.n_records
    ));
    let cat_rows: Vec<Vec<String>> = inputs
        .eda
        .categorical
        .iter()
        .flat_map(|c| {
            c.counts
                .iter()
                .map(|(level, count)| vec![c.name.clone(), level.clone(), count.to_string()])
                .collect::<Vec<_>>()
        })
        .collect();
    html.push_str(&html_table(&["column", "level", "count"], &cat_rows));

    html.push_str("<h2>Binary distress models (validation round)</h2>\n");
    html.push_str(&html_table(
        &["model", "ROC-AUC", "PR-AUC", "Brier", "log loss"],
        binary_rows,
    ));
    html.push_str(
        "<p class=\"note\">Binary distress stays a low-signal task: rankings hover near \
         chance on the held-out round, so probability calibration and monitoring carry the \
         operational weight.</p>\n",
    );

    html.push_str("<h2>Severity models (validation round)</h2>\n");
    html.push_str(&html_table(&["model", "accuracy", "macro-F1"], severity_rows));

    html.push_str("<h2>Calibration</h2>\n");
    let cal_rows: Vec<Vec<String>> = inputs
        .evaluation
        .binary
        .iter()
        .map(|(name, eval)| {
            vec![
                name.clone(),
                format!("{:.4}", eval.calibration.raw_brier),
                format!("{:.4}", eval.calibration.calibrated_brier),
                format!("{:.4}", eval.calibration.raw_roc_auc),
                format!("{:.4}", eval.calibration.calibrated_roc_auc),
            ]
        })
        .collect();
    html.push_str(&html_table(
        &["model", "raw Brier", "calibrated Brier", "raw ROC-AUC", "calibrated ROC-AUC"],
        &cal_rows,
    ));
    html.push_str(
        "<p class=\"note\">Reliability-curve points for both raw and calibrated probabilities \
         are in <code>charts/calibration_curves.json</code>.</p>\n",
    );

    html.push_str("<h2>Feature importance</h2>\n");
    for (tag, importance) in [
        ("Binary distress model", &inputs.importance_binary),
        ("Severity model", &inputs.importance_severity),
    ] {
        html.push_str(&format!("<h3>{tag}</h3>\n"));
        let rows: Vec<Vec<String>> = importance
            .ranking
            .iter()
            .take(10)
            .enumerate()
            .map(|(i, (f, v))| vec![(i + 1).to_string(), f.clone(), format!("{v:.4}")])
            .collect();
        html.push_str(&html_table(&["rank", "feature", "mean |contribution|"], &rows));
    }

    html.push_str("<h2>Household narratives</h2>\n<pre>");
    html.push_str(&html_escape(&inputs.narratives));
    html.push_str("</pre>\n");

    html.push_str("<h2>Robustness under shocks</h2>\n");
    html.push_str(&html_table(
        &["task", "metric", "original", "shocked", "delta"],
        stress_rows,
    ));

    html.push_str("<h2>Data drift</h2>\n");
    let drift_rows: Vec<Vec<String>> = inputs
        .drift
        .validation
        .psi
        .iter()
        .map(|(feature, value)| {
            let shocked = inputs
                .drift
                .shocked_validation
                .psi
                .get(feature)
                .copied()
                .unwrap_or(f64::NAN);
            vec![feature.clone(), format!("{value:.4}"), format!("{shocked:.4}")]
        })
        .collect();
    html.push_str(&html_table(
        &["feature", "PSI (validation)", "PSI (shocked validation)"],
        &drift_rows,
    ));
    html.push_str(&format!(
        "<p>Retraining recommended after shock: <b>{}</b> (threshold {}). Flagged: {}</p>\n",
        inputs.drift.shocked_validation.retrain_recommended,
        inputs.drift.shocked_validation.threshold,
        if inputs.drift.shocked_validation.flagged_features.is_empty() {
            "none".to_string()
        } else {
            inputs.drift.shocked_validation.flagged_features.join(", ")
        }
    ));

    html.push_str("</body>\n</html>\n");
    html
}
