//! Dataset EDA summary: per-column moments, histograms, categorical
//! frequencies, and a Pearson correlation matrix including both targets.

use super::{HouseholdRecord, Level, PanelDataset, CATEGORICAL_COLUMN, NUMERIC_COLUMNS};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSummary {
    pub name: String,
    pub n_present: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSummary {
    pub name: String,
    pub counts: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaSummary {
    pub n_records: usize,
    pub n_households: usize,
    pub rounds: Vec<u32>,
    pub numeric: Vec<NumericSummary>,
    pub categorical: Vec<CategoricalSummary>,
    /// Column order for the correlation matrix: numeric indicators then the
    /// two targets (encoded 0/1 and 0/1/2).
    pub correlation_names: Vec<String>,
    /// Pearson correlations; `None` marks entries undefined due to zero
    /// variance or insufficient overlap.
    pub correlation: Vec<Vec<Option<f64>>>,
}

const HISTOGRAM_BINS: usize = 20;

/// Sample skewness by the standard third-moment estimator m3 / m2^(3/2).
fn skewness(values: &[f64], mean: f64) -> f64 {
    let n = values.len() as f64;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

fn numeric_summary(name: &str, values: &[f64]) -> NumericSummary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let histogram = if max > min {
        let width = (max - min) / HISTOGRAM_BINS as f64;
        let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
            .map(|i| HistogramBin {
                lo: min + i as f64 * width,
                hi: min + (i + 1) as f64 * width,
                count: 0,
            })
            .collect();
        for &v in values {
            let idx = (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1);
            bins[idx].count += 1;
        }
        bins
    } else {
        vec![HistogramBin {
            lo: min,
            hi: max,
            count: n,
        }]
    };
    NumericSummary {
        name: name.to_string(),
        n_present: n,
        mean,
        sd: var.sqrt(),
        skewness: skewness(values, mean),
        min,
        max,
        histogram,
    }
}

/// Pearson correlation over pairwise-complete pairs; `None` when either side
/// is constant or fewer than two pairs overlap.
fn pearson(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn severity_code(level: Level) -> f64 {
    match level {
        Level::Low => 0.0,
        Level::Medium => 1.0,
        Level::High => 2.0,
    }
}

pub fn summarize(data: &PanelDataset) -> Result<EdaSummary> {
    if data.is_empty() {
        return Err(Error::Domain(
            "cannot summarize an empty dataset".to_string(),
        ));
    }
    let records = data.records();

    let mut numeric = Vec::new();
    let mut series: Vec<Vec<Option<f64>>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for col in NUMERIC_COLUMNS {
        let column: Vec<Option<f64>> = records.iter().map(|r| r.numeric(col)).collect();
        let present: Vec<f64> = column.iter().flatten().copied().collect();
        if !present.is_empty() {
            numeric.push(numeric_summary(col, &present));
        }
        names.push(col.to_string());
        series.push(column);
    }
    names.push("distress_label".to_string());
    series.push(
        records
            .iter()
            .map(|r| Some(f64::from(r.distress_label)))
            .collect(),
    );
    names.push("severity_label".to_string());
    series.push(
        records
            .iter()
            .map(|r| Some(severity_code(r.severity_label)))
            .collect(),
    );

    let k = series.len();
    let mut correlation = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let value = pearson(&series[i], &series[j]);
            correlation[i][j] = value;
            correlation[j][i] = value;
        }
    }

    let level_counts = |get: &dyn Fn(&HouseholdRecord) -> Option<Level>| -> Vec<(String, usize)> {
        Level::ALL
            .iter()
            .map(|lvl| {
                (
                    lvl.as_str().to_string(),
                    records.iter().filter(|r| get(r) == Some(*lvl)).count(),
                )
            })
            .collect()
    };
    let categorical = vec![
        CategoricalSummary {
            name: CATEGORICAL_COLUMN.to_string(),
            counts: level_counts(&|r| r.disaster_level),
        },
        CategoricalSummary {
            name: "distress_label".to_string(),
            counts: vec![
                (
                    "0".to_string(),
                    records.iter().filter(|r| r.distress_label == 0).count(),
                ),
                (
                    "1".to_string(),
                    records.iter().filter(|r| r.distress_label == 1).count(),
                ),
            ],
        },
        CategoricalSummary {
            name: "severity_label".to_string(),
            counts: level_counts(&|r| Some(r.severity_label)),
        },
    ];

    Ok(EdaSummary {
        n_records: records.len(),
        n_households: data.n_households(),
        rounds: data.rounds(),
        numeric,
        categorical,
        correlation_names: names,
        correlation,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{generate_synthetic, GeneratorConfig, PanelDataset};
    use super::*;
    use crate::testkit;

    #[test]
    fn empty_dataset_is_a_domain_error() {
        let data = PanelDataset::new(vec![]).unwrap();
        assert!(matches!(
            summarize(&data),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn constant_column_reports_zero_sd_and_undefined_correlation() {
        // gdp_growth constant across all rows in the test kit default.
        let data = testkit::balanced_panel(5, 2, |_| {});
        let eda = summarize(&data).unwrap();
        let gdp = eda.numeric.iter().find(|s| s.name == "gdp_growth").unwrap();
        assert_eq!(gdp.sd, 0.0);
        let i = eda
            .correlation_names
            .iter()
            .position(|n| n == "gdp_growth")
            .unwrap();
        assert!(eda.correlation[i].iter().all(Option::is_none));
    }

    #[test]
    fn self_correlation_is_one_for_varying_columns() {
        let mut value = 0.0;
        let data = testkit::balanced_panel(6, 2, |rec| {
            value += 1.0;
            rec.inflation = Some(value);
        });
        let eda = summarize(&data).unwrap();
        let i = eda
            .correlation_names
            .iter()
            .position(|n| n == "inflation")
            .unwrap();
        assert_eq!(eda.correlation[i][i], Some(1.0));
    }

    #[test]
    fn seed42_disaster_impact_correlates_with_distress() {
        // Independent Pearson evaluation over the pooled rounds.
        let data = generate_synthetic(&GeneratorConfig::default()).unwrap();
        let x: Vec<f64> = data
            .records()
            .iter()
            .map(|r| r.disaster_impact.unwrap())
            .collect();
        let y: Vec<f64> = data
            .records()
            .iter()
            .map(|r| f64::from(r.distress_label))
            .collect();
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        let mut sxy = 0.0;
        for (a, b) in x.iter().zip(&y) {
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
            sxy += (a - mx) * (b - my);
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!(rho > 0.2, "pooled corr {rho}");

        // And the summary's own matrix agrees.
        let eda = summarize(&data).unwrap();
        let i = eda
            .correlation_names
            .iter()
            .position(|s| s == "disaster_impact")
            .unwrap();
        let j = eda
            .correlation_names
            .iter()
            .position(|s| s == "distress_label")
            .unwrap();
        let reported = eda.correlation[i][j].unwrap();
        assert!((reported - rho).abs() < 1e-12);
    }

    #[test]
    fn histograms_cover_all_rows() {
        let data = generate_synthetic(&GeneratorConfig {
            n_households: 40,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let eda = summarize(&data).unwrap();
        for s in &eda.numeric {
            let total: usize = s.histogram.iter().map(|b| b.count).sum();
            assert_eq!(total, s.n_present, "{}", s.name);
        }
    }
}
