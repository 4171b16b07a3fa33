//! Transform fitting (train rounds only) and application: imputation,
//! log1p for skewed columns, engineered families, and standardization.

use super::matrix::FeatureMatrix;
use super::{
    interaction_series, lag_series, record_severity_target, rolling_series, squared_series,
    velocity_series, FeatureRecipe, KeyedSeries,
};
use crate::error::{Error, Result};
use crate::panel::{HouseholdRecord, Level, PanelDataset, NUMERIC_COLUMNS};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const TRANSFORM_SCHEMA_VERSION: &str = "transform-v1";

/// Standardization record for one matrix column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub name: String,
    /// Flag columns pass through unscaled.
    pub is_flag: bool,
    pub mean: f64,
    pub sd: f64,
    /// Constant on the training slice; standardized output is 0.
    pub constant: bool,
}

/// Everything needed to turn raw panel rows into model-ready rows, fitted on
/// training rounds only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformState {
    pub schema_version: String,
    pub fitted_on_rounds: BTreeSet<u32>,
    pub recipe: FeatureRecipe,
    /// Raw-scale imputation value per numeric column.
    pub numeric_medians: BTreeMap<String, f64>,
    pub disaster_level_mode: Level,
    /// Raw-scale (pre-log, post-imputation) training mean per numeric column.
    pub raw_means: BTreeMap<String, f64>,
    /// Raw-scale training standard deviation per numeric column.
    pub raw_sds: BTreeMap<String, f64>,
    pub columns: Vec<ColumnTransform>,
}

impl TransformState {
    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn raw_sd(&self, column: &str) -> Option<f64> {
        self.raw_sds.get(column).copied()
    }
}

struct Assembled {
    keys: Vec<(u32, u32)>,
    value_columns: Vec<KeyedSeries>,
    flag_columns: Vec<(String, Vec<f64>)>,
    imputed_cells: BTreeMap<String, usize>,
}

fn median(sorted: &mut Vec<f64>) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Build every value and flag column for a sorted record slice, using frozen
/// imputation values. All engineered cells depend only on rows at or before
/// their own round.
fn assemble(
    records: &[&HouseholdRecord],
    recipe: &FeatureRecipe,
    medians: &BTreeMap<String, f64>,
    mode: Level,
) -> Result<Assembled> {
    let keys: Vec<(u32, u32)> = records.iter().map(|r| r.key()).collect();
    debug_assert!(keys.windows(2).all(|w| w[0] < w[1]), "records sorted by key");
    let n = records.len();
    let mut imputed_cells: BTreeMap<String, usize> = BTreeMap::new();

    // Raw numeric columns: impute on the raw scale, then log1p where
    // registered so every derived family sees the transformed scale.
    let mut base: BTreeMap<&str, KeyedSeries> = BTreeMap::new();
    let mut raw_flags: Vec<(String, Vec<f64>)> = Vec::new();
    for col in NUMERIC_COLUMNS {
        let fill = *medians
            .get(col)
            .ok_or_else(|| Error::Domain(format!("no imputation value fitted for '{col}'")))?;
        let log = recipe.skew_log_columns.iter().any(|c| c == col);
        let mut values = Vec::with_capacity(n);
        let mut imputed = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for rec in records {
            let (v, miss) = match rec.numeric(col) {
                Some(v) => (v, false),
                None => (fill, true),
            };
            values.push(if log { v.ln_1p() } else { v });
            imputed.push(miss);
            flags.push(f64::from(miss));
            if miss {
                *imputed_cells.entry(col.to_string()).or_default() += 1;
            }
        }
        base.insert(
            col,
            KeyedSeries {
                name: col.to_string(),
                keys: keys.clone(),
                values,
                imputed,
            },
        );
        raw_flags.push((format!("miss_{col}"), flags));
    }

    let mut value_columns: Vec<KeyedSeries> = Vec::new();
    for col in NUMERIC_COLUMNS {
        value_columns.push(base[col].clone());
    }

    // One-hot disaster level (Low is the baseline).
    let mut medium = KeyedSeries {
        name: "disaster_level_medium".to_string(),
        keys: keys.clone(),
        values: vec![0.0; n],
        imputed: vec![false; n],
    };
    let mut high = KeyedSeries {
        name: "disaster_level_high".to_string(),
        keys: keys.clone(),
        values: vec![0.0; n],
        imputed: vec![false; n],
    };
    let mut level_flags = vec![0.0; n];
    for (i, rec) in records.iter().enumerate() {
        let level = match rec.disaster_level {
            Some(level) => level,
            None => {
                level_flags[i] = 1.0;
                *imputed_cells
                    .entry("disaster_level".to_string())
                    .or_default() += 1;
                mode
            }
        };
        medium.values[i] = f64::from(level == Level::Medium);
        high.values[i] = f64::from(level == Level::High);
    }
    value_columns.push(medium);
    value_columns.push(high);

    // Engineered families, in deterministic order.
    let mut lag_flags: Vec<(String, Vec<f64>)> = Vec::new();
    for col in &recipe.lag_columns {
        let lagged = lag_series(&base[col.as_str()]);
        lag_flags.push((
            format!("miss_{}", lagged.name),
            lagged.imputed.iter().map(|&b| f64::from(b)).collect(),
        ));
        value_columns.push(lagged);
    }
    for col in &recipe.rolling_columns {
        let (mean, sd) = rolling_series(&base[col.as_str()], recipe.rolling_window);
        value_columns.push(mean);
        value_columns.push(sd);
    }
    let mut velocity_flags: Vec<(String, Vec<f64>)> = Vec::new();
    for col in &recipe.velocity_columns {
        let vel = velocity_series(&base[col.as_str()]);
        velocity_flags.push((
            format!("miss_{}", vel.name),
            vel.imputed.iter().map(|&b| f64::from(b)).collect(),
        ));
        value_columns.push(vel);
    }
    for (a, b) in &recipe.interactions {
        value_columns.push(interaction_series(&base[a.as_str()], &base[b.as_str()]));
    }
    for col in &recipe.squared_columns {
        value_columns.push(squared_series(&base[col.as_str()]));
    }

    let mut flag_columns = raw_flags;
    flag_columns.push(("miss_disaster_level".to_string(), level_flags));
    flag_columns.extend(lag_flags);
    flag_columns.extend(velocity_flags);

    Ok(Assembled {
        keys,
        value_columns,
        flag_columns,
        imputed_cells,
    })
}

/// Fit imputation values and standardization statistics on the training
/// rounds only.
pub fn fit_transforms(
    data: &PanelDataset,
    recipe: &FeatureRecipe,
    train_rounds: &BTreeSet<u32>,
) -> Result<TransformState> {
    if train_rounds.is_empty() {
        return Err(Error::Domain("train_rounds must be nonempty".to_string()));
    }
    recipe.validate(data.rounds().len() as u32)?;
    let train: Vec<&HouseholdRecord> = data.filter_rounds(train_rounds);
    if train.is_empty() {
        return Err(Error::Domain(format!(
            "no rows in training rounds {train_rounds:?}"
        )));
    }

    let mut numeric_medians = BTreeMap::new();
    for col in NUMERIC_COLUMNS {
        let mut present: Vec<f64> = train.iter().filter_map(|r| r.numeric(col)).collect();
        if present.is_empty() {
            return Err(Error::Domain(format!(
                "column '{col}' has no observed training values to impute from"
            )));
        }
        numeric_medians.insert(col.to_string(), median(&mut present));
    }

    let mut level_counts: BTreeMap<Level, usize> = BTreeMap::new();
    for rec in &train {
        if let Some(level) = rec.disaster_level {
            *level_counts.entry(level).or_default() += 1;
        }
    }
    let disaster_level_mode = Level::ALL
        .iter()
        .copied()
        .max_by_key(|lvl| level_counts.get(lvl).copied().unwrap_or(0))
        .unwrap();
    if level_counts.is_empty() {
        return Err(Error::Domain(
            "disaster_level has no observed training values to impute from".to_string(),
        ));
    }

    // Raw-scale stats (post-imputation) for shock sizing and drift baselines.
    let mut raw_means = BTreeMap::new();
    let mut raw_sds = BTreeMap::new();
    for col in NUMERIC_COLUMNS {
        let fill = numeric_medians[col];
        let values: Vec<f64> = train
            .iter()
            .map(|r| r.numeric(col).unwrap_or(fill))
            .collect();
        let (mean, sd) = mean_sd(&values);
        raw_means.insert(col.to_string(), mean);
        raw_sds.insert(col.to_string(), sd);
    }

    let assembled = assemble(&train, recipe, &numeric_medians, disaster_level_mode)?;
    let mut columns = Vec::new();
    for series in &assembled.value_columns {
        let (mean, sd) = mean_sd(&series.values);
        columns.push(ColumnTransform {
            name: series.name.clone(),
            is_flag: false,
            mean,
            sd,
            constant: sd < 1e-12,
        });
    }
    for (name, _) in &assembled.flag_columns {
        columns.push(ColumnTransform {
            name: name.clone(),
            is_flag: true,
            mean: 0.0,
            sd: 1.0,
            constant: false,
        });
    }

    Ok(TransformState {
        schema_version: TRANSFORM_SCHEMA_VERSION.to_string(),
        fitted_on_rounds: train_rounds.clone(),
        recipe: recipe.clone(),
        numeric_medians,
        disaster_level_mode,
        raw_means,
        raw_sds,
        columns,
    })
}

/// Apply a fitted state to a dataset, producing the standardized design
/// matrix with flags and targets attached.
pub fn apply_transforms(state: &TransformState, data: &PanelDataset) -> Result<FeatureMatrix> {
    let records: Vec<&HouseholdRecord> = data.records().iter().collect();
    let assembled = assemble(
        &records,
        &state.recipe,
        &state.numeric_medians,
        state.disaster_level_mode,
    )?;

    let n_rows = assembled.keys.len();
    let n_value = assembled.value_columns.len();
    let n_cols = n_value + assembled.flag_columns.len();
    if n_cols != state.columns.len() {
        return Err(Error::Shape(format!(
            "fitted state has {} columns but assembly produced {n_cols}",
            state.columns.len()
        )));
    }

    let mut values = vec![0.0_f64; n_rows * n_cols];
    for (j, series) in assembled.value_columns.iter().enumerate() {
        let t = &state.columns[j];
        if t.name != series.name {
            return Err(Error::Shape(format!(
                "column order mismatch: fitted '{}' vs assembled '{}'",
                t.name, series.name
            )));
        }
        for i in 0..n_rows {
            values[i * n_cols + j] = if t.constant {
                0.0
            } else {
                (series.values[i] - t.mean) / t.sd
            };
        }
    }
    for (k, (name, column)) in assembled.flag_columns.iter().enumerate() {
        let j = n_value + k;
        if state.columns[j].name != *name {
            return Err(Error::Shape(format!(
                "flag column order mismatch: fitted '{}' vs assembled '{name}'",
                state.columns[j].name
            )));
        }
        for i in 0..n_rows {
            values[i * n_cols + j] = column[i];
        }
    }

    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model(
            "feature matrix contains non-finite values after transformation".to_string(),
        ));
    }

    let warnings: Vec<String> = assembled
        .imputed_cells
        .iter()
        .map(|(col, count)| format!("{col}: {count} missing cells imputed"))
        .collect();

    Ok(FeatureMatrix {
        keys: assembled.keys,
        column_names: state.column_names(),
        values,
        target_binary: records.iter().map(|r| r.distress_label).collect(),
        target_severity: records.iter().map(|r| record_severity_target(r)).collect(),
        warnings,
    })
}
