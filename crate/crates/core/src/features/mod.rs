//! Leakage-safe feature engineering: ordinal encoding, per-household lags,
//! rolling statistics, velocities, interaction terms, and train-round-only
//! imputation and standardization.

mod matrix;
mod transform;

pub use matrix::{
    read_feature_csv, read_feature_csv_str, write_feature_csv, write_feature_csv_string,
    FeatureMatrix,
};
pub use transform::{apply_transforms, fit_transforms, ColumnTransform, TransformState};

use crate::error::{Error, Result};
use crate::panel::{HouseholdRecord, Level, PanelDataset, NUMERIC_COLUMNS};
use serde::{Deserialize, Serialize};

/// Ordinal code for a severity level: Low 0, Medium 1, High 2.
pub fn severity_code(level: Level) -> u8 {
    match level {
        Level::Low => 0,
        Level::Medium => 1,
        Level::High => 2,
    }
}

/// Parse-and-encode variant for textual labels.
pub fn ordinal_encode_severity(label: &str) -> Result<u8> {
    Level::parse(label)
        .map(severity_code)
        .ok_or_else(|| Error::Integrity(format!("unknown severity label '{label}'")))
}

/// Which engineered families to build from which columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureRecipe {
    pub lag_columns: Vec<String>,
    pub rolling_columns: Vec<String>,
    pub rolling_window: u32,
    pub velocity_columns: Vec<String>,
    pub interactions: Vec<(String, String)>,
    pub squared_columns: Vec<String>,
    /// Right-skewed columns run through log1p before standardization and
    /// before any engineered family is derived from them.
    pub skew_log_columns: Vec<String>,
}

impl Default for FeatureRecipe {
    fn default() -> Self {
        let all: Vec<String> = NUMERIC_COLUMNS.iter().map(|s| s.to_string()).collect();
        FeatureRecipe {
            lag_columns: all.clone(),
            rolling_columns: all.clone(),
            rolling_window: 2,
            velocity_columns: all,
            interactions: vec![(
                "disaster_impact".to_string(),
                "household_borrowing_rate".to_string(),
            )],
            squared_columns: vec!["household_borrowing_rate".to_string()],
            skew_log_columns: vec![
                "household_borrowing_rate".to_string(),
                "cyber_incident_count".to_string(),
                "disaster_impact".to_string(),
                "disaster_severity_score".to_string(),
            ],
        }
    }
}

impl FeatureRecipe {
    pub fn validate(&self, n_rounds: u32) -> Result<()> {
        let known = |name: &String| NUMERIC_COLUMNS.contains(&name.as_str());
        let families: [(&str, &Vec<String>); 4] = [
            ("lag_columns", &self.lag_columns),
            ("rolling_columns", &self.rolling_columns),
            ("velocity_columns", &self.velocity_columns),
            ("squared_columns", &self.squared_columns),
        ];
        for (family, columns) in families {
            if let Some(bad) = columns.iter().find(|c| !known(c)) {
                return Err(Error::Config(format!(
                    "{family} references unknown column '{bad}'"
                )));
            }
        }
        for (a, b) in &self.interactions {
            for col in [a, b] {
                if !known(col) {
                    return Err(Error::Config(format!(
                        "interactions reference unknown column '{col}'"
                    )));
                }
            }
        }
        if let Some(bad) = self.skew_log_columns.iter().find(|c| !known(c)) {
            return Err(Error::Config(format!(
                "skew_log_columns references unknown column '{bad}'"
            )));
        }
        if self.rolling_window < 2 {
            return Err(Error::Config(format!(
                "rolling_window must be >= 2, got {}",
                self.rolling_window
            )));
        }
        if self.rolling_window > n_rounds {
            return Err(Error::Config(format!(
                "rolling_window ({}) must not exceed the panel round count ({n_rounds})",
                self.rolling_window
            )));
        }
        Ok(())
    }
}

/// One engineered or raw column keyed by (household_id, round), plus a flag
/// marking cells whose value had to be imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedSeries {
    pub name: String,
    pub keys: Vec<(u32, u32)>,
    pub values: Vec<f64>,
    pub imputed: Vec<bool>,
}

impl KeyedSeries {
    fn like(&self, name: String) -> KeyedSeries {
        KeyedSeries {
            name,
            keys: self.keys.clone(),
            values: vec![0.0; self.values.len()],
            imputed: vec![false; self.values.len()],
        }
    }

    /// Ranges of indices belonging to one household; keys are sorted.
    fn household_spans(&self) -> Vec<std::ops::Range<usize>> {
        let mut spans = Vec::new();
        let mut start = 0;
        for i in 1..=self.keys.len() {
            if i == self.keys.len() || self.keys[i].0 != self.keys[start].0 {
                spans.push(start..i);
                start = i;
            }
        }
        spans
    }
}

/// Dense series for one raw column; errors if any referenced cell is missing
/// (pipeline callers impute first).
pub fn extract_series(data: &PanelDataset, column: &str) -> Result<KeyedSeries> {
    if !NUMERIC_COLUMNS.contains(&column) {
        return Err(Error::Schema {
            missing: vec![column.to_string()],
        });
    }
    let mut keys = Vec::with_capacity(data.len());
    let mut values = Vec::with_capacity(data.len());
    for rec in data.records() {
        let v = rec.numeric(column).ok_or_else(|| {
            Error::Domain(format!(
                "column '{column}' has a missing cell at household {} round {}; impute before deriving features",
                rec.household_id, rec.round
            ))
        })?;
        keys.push(rec.key());
        values.push(v);
    }
    Ok(KeyedSeries {
        name: column.to_string(),
        keys,
        values,
        imputed: vec![false; data.len()],
    })
}

/// Value from the household's prior round; at the household's earliest round
/// the value is backfilled from that round itself and flagged.
pub fn lag_series(series: &KeyedSeries) -> KeyedSeries {
    let mut out = series.like(format!("lag_{}", series.name));
    for span in series.household_spans() {
        for i in span.clone() {
            if i == span.start {
                out.values[i] = series.values[span.start];
                out.imputed[i] = true;
            } else {
                out.values[i] = series.values[i - 1];
            }
        }
    }
    out
}

/// First difference between consecutive rounds; zero with a flag at the
/// household's earliest round.
pub fn velocity_series(series: &KeyedSeries) -> KeyedSeries {
    let mut out = series.like(format!("velocity_{}", series.name));
    for span in series.household_spans() {
        for i in span.clone() {
            if i == span.start {
                out.values[i] = 0.0;
                out.imputed[i] = true;
            } else {
                out.values[i] = series.values[i] - series.values[i - 1];
            }
        }
    }
    out
}

/// Backward-looking rolling mean and sample standard deviation over at most
/// `window` rounds; a single-observation window has sd 0.
pub fn rolling_series(series: &KeyedSeries, window: u32) -> (KeyedSeries, KeyedSeries) {
    let mut mean_out = series.like(format!("roll_mean_{}", series.name));
    let mut sd_out = series.like(format!("roll_sd_{}", series.name));
    let w = window as usize;
    for span in series.household_spans() {
        for i in span.clone() {
            let start = (i - span.start + 1).saturating_sub(w) + span.start;
            let slice = &series.values[start..=i];
            let n = slice.len() as f64;
            let mean = slice.iter().sum::<f64>() / n;
            let sd = if slice.len() > 1 {
                (slice.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            mean_out.values[i] = mean;
            sd_out.values[i] = sd;
        }
    }
    (mean_out, sd_out)
}

/// Elementwise product of two series.
pub fn interaction_series(a: &KeyedSeries, b: &KeyedSeries) -> KeyedSeries {
    debug_assert_eq!(a.keys, b.keys);
    let mut out = a.like(format!("{}_x_{}", a.name, b.name));
    for i in 0..a.values.len() {
        out.values[i] = a.values[i] * b.values[i];
    }
    out
}

/// Elementwise square.
pub fn squared_series(a: &KeyedSeries) -> KeyedSeries {
    let mut out = a.like(format!("{}_sq", a.name));
    for i in 0..a.values.len() {
        out.values[i] = a.values[i] * a.values[i];
    }
    out
}

/// Spec-level convenience: lag columns for a dataset.
pub fn add_lags(data: &PanelDataset, columns: &[String]) -> Result<Vec<KeyedSeries>> {
    columns
        .iter()
        .map(|c| Ok(lag_series(&extract_series(data, c)?)))
        .collect()
}

/// Spec-level convenience: rolling mean/sd pairs for a dataset.
pub fn add_rolling(
    data: &PanelDataset,
    columns: &[String],
    window: u32,
) -> Result<Vec<KeyedSeries>> {
    if window < 2 {
        return Err(Error::Config(format!(
            "rolling window must be >= 2, got {window}"
        )));
    }
    let mut out = Vec::with_capacity(columns.len() * 2);
    for c in columns {
        let (mean, sd) = rolling_series(&extract_series(data, c)?, window);
        out.push(mean);
        out.push(sd);
    }
    Ok(out)
}

/// Spec-level convenience: velocity columns for a dataset.
pub fn add_velocity(data: &PanelDataset, columns: &[String]) -> Result<Vec<KeyedSeries>> {
    columns
        .iter()
        .map(|c| Ok(velocity_series(&extract_series(data, c)?)))
        .collect()
}

/// Spec-level convenience: interaction products and squares from a recipe.
pub fn add_interactions(data: &PanelDataset, recipe: &FeatureRecipe) -> Result<Vec<KeyedSeries>> {
    let mut out = Vec::new();
    for (a, b) in &recipe.interactions {
        let sa = extract_series(data, a)?;
        let sb = extract_series(data, b)?;
        out.push(interaction_series(&sa, &sb));
    }
    for c in &recipe.squared_columns {
        out.push(squared_series(&extract_series(data, c)?));
    }
    Ok(out)
}

pub(crate) fn record_severity_target(rec: &HouseholdRecord) -> u8 {
    severity_code(rec.severity_label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{generate_synthetic, GeneratorConfig};
    use crate::testkit;
    use std::collections::BTreeSet;

    fn series_of(values: &[(u32, u32, f64)]) -> KeyedSeries {
        KeyedSeries {
            name: "inflation".to_string(),
            keys: values.iter().map(|(h, r, _)| (*h, *r)).collect(),
            values: values.iter().map(|(_, _, v)| *v).collect(),
            imputed: vec![false; values.len()],
        }
    }

    #[test]
    fn ordinal_encoding_is_order_preserving() {
        assert_eq!(ordinal_encode_severity("Low").unwrap(), 0);
        assert_eq!(ordinal_encode_severity("Medium").unwrap(), 1);
        assert_eq!(ordinal_encode_severity("High").unwrap(), 2);
        assert!(
            ordinal_encode_severity("Medium").unwrap() < ordinal_encode_severity("High").unwrap()
        );
        assert!(ordinal_encode_severity("Severe").is_err());
    }

    #[test]
    fn lag_backfills_first_round_with_flag() {
        let s = series_of(&[(1, 1, 4.0), (1, 2, 5.0), (1, 3, 6.0)]);
        let lag = lag_series(&s);
        assert_eq!(lag.values, vec![4.0, 4.0, 5.0]);
        assert_eq!(lag.imputed, vec![true, false, false]);
    }

    #[test]
    fn single_round_panel_lags_are_all_flagged() {
        let s = series_of(&[(1, 1, 2.0), (2, 1, 3.0), (3, 1, 4.0)]);
        let lag = lag_series(&s);
        assert!(lag.imputed.iter().all(|&b| b));
        assert_eq!(lag.values, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn lag_values_are_invariant_to_household_order_in_input() {
        let config = GeneratorConfig {
            n_households: 30,
            ..GeneratorConfig::default()
        };
        let data = generate_synthetic(&config).unwrap();
        let mut shuffled: Vec<_> = data.records().to_vec();
        shuffled.reverse();
        let reordered = crate::panel::PanelDataset::new(shuffled).unwrap();
        let a = add_lags(&data, &["inflation".to_string()]).unwrap();
        let b = add_lags(&reordered, &["inflation".to_string()]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rolling_window_two_matches_hand_computed_sample_sd() {
        let s = series_of(&[(1, 1, 1.0), (1, 2, 3.0)]);
        let (mean, sd) = rolling_series(&s, 2);
        assert_eq!(mean.values[1], 2.0);
        assert!((sd.values[1] - 1.414214).abs() < 1e-6);
        // Single-point window at round 1.
        assert_eq!(mean.values[0], 1.0);
        assert_eq!(sd.values[0], 0.0);
    }

    #[test]
    fn rolling_sd_of_constant_series_is_zero_everywhere() {
        let s = series_of(&[(1, 1, 7.0), (1, 2, 7.0), (1, 3, 7.0)]);
        let (_, sd) = rolling_series(&s, 2);
        assert!(sd.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn velocity_is_first_difference_with_flagged_first_round() {
        let s = series_of(&[(1, 1, 10.0), (1, 2, 12.0), (1, 3, 15.0)]);
        let v = velocity_series(&s);
        assert_eq!(v.values, vec![0.0, 2.0, 3.0]);
        assert_eq!(v.imputed, vec![true, false, false]);

        let constant = series_of(&[(1, 1, 5.0), (1, 2, 5.0)]);
        assert_eq!(velocity_series(&constant).values, vec![0.0, 0.0]);
    }

    #[test]
    fn velocity_and_lag_commute_from_round_three_on() {
        let data = generate_synthetic(&GeneratorConfig {
            n_households: 20,
            n_rounds: 4,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let s = extract_series(&data, "household_borrowing_rate").unwrap();
        let a = velocity_series(&lag_series(&s));
        let b = lag_series(&velocity_series(&s));
        for i in 0..s.keys.len() {
            if s.keys[i].1 >= 3 {
                assert!(
                    (a.values[i] - b.values[i]).abs() < 1e-12,
                    "key {:?}",
                    s.keys[i]
                );
            }
        }
    }

    #[test]
    fn interactions_and_squares_follow_direct_arithmetic() {
        let a = series_of(&[(1, 1, 2.0)]);
        let mut b = series_of(&[(1, 1, 3.0)]);
        b.name = "household_borrowing_rate".to_string();
        assert_eq!(interaction_series(&a, &b).values, vec![6.0]);
        assert_eq!(squared_series(&b).values, vec![9.0]);
        let zero = series_of(&[(1, 1, 0.0)]);
        assert_eq!(squared_series(&zero).values, vec![0.0]);
        let frac = series_of(&[(1, 1, 2.5)]);
        assert_eq!(squared_series(&frac).values, vec![6.25]);
    }

    #[test]
    fn absent_column_is_a_schema_error() {
        let data = testkit::balanced_panel(3, 2, |_| {});
        let err = add_lags(&data, &["not_a_column".to_string()]).unwrap_err();
        assert!(matches!(err, crate::Error::Schema { .. }));
    }

    #[test]
    fn recipe_validation_names_bad_columns_and_window() {
        let mut recipe = FeatureRecipe::default();
        recipe.lag_columns.push("bogus".to_string());
        assert!(recipe.validate(3).unwrap_err().to_string().contains("bogus"));

        let recipe = FeatureRecipe {
            rolling_window: 5,
            ..FeatureRecipe::default()
        };
        assert!(recipe
            .validate(3)
            .unwrap_err()
            .to_string()
            .contains("rolling_window"));
    }

    #[test]
    fn default_recipe_covers_all_numeric_columns() {
        let recipe = FeatureRecipe::default();
        assert_eq!(recipe.lag_columns.len(), 14);
        assert_eq!(recipe.rolling_columns.len(), 14);
        assert_eq!(recipe.velocity_columns.len(), 14);
        recipe.validate(3).unwrap();
    }

    #[test]
    fn fit_median_and_constant_column_behaviour() {
        let mut i = 0;
        let data = testkit::balanced_panel(3, 1, |rec| {
            rec.inflation = Some([1.0, 2.0, 100.0][i % 3]);
            i += 1;
        });
        let recipe = FeatureRecipe {
            rolling_window: 2,
            ..FeatureRecipe::default()
        };
        // Window must not exceed rounds; use a 2-round panel for the rest.
        let mut j = 0;
        let data2 = testkit::balanced_panel(3, 2, |rec| {
            rec.inflation = Some([1.0, 2.0, 100.0, 1.0, 2.0, 100.0][j % 6]);
            j += 1;
        });
        drop(data);
        let state = fit_transforms(&data2, &recipe, &BTreeSet::from([1, 2])).unwrap();
        assert_eq!(state.numeric_medians["inflation"], 2.0);
        // gdp_growth is constant in the test kit.
        let gdp = state
            .columns
            .iter()
            .find(|c| c.name == "gdp_growth")
            .unwrap();
        assert!(gdp.constant);
    }

    #[test]
    fn transform_state_ignores_rows_outside_training_rounds() {
        let data = generate_synthetic(&GeneratorConfig {
            n_households: 40,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let recipe = FeatureRecipe::default();
        let train: BTreeSet<u32> = BTreeSet::from([1]);
        let state_a = fit_transforms(&data, &recipe, &train).unwrap();

        // Mutate every round-3 row heavily and refit.
        let mut records = data.records().to_vec();
        for rec in &mut records {
            if rec.round == 3 {
                rec.inflation = Some(99.0);
                rec.household_borrowing_rate = Some(77.0);
                rec.disaster_level = Some(crate::panel::Level::High);
            }
        }
        let mutated = crate::panel::PanelDataset::new(records).unwrap();
        let state_b = fit_transforms(&mutated, &recipe, &train).unwrap();
        assert_eq!(
            serde_json::to_string(&state_a).unwrap(),
            serde_json::to_string(&state_b).unwrap()
        );
    }

    #[test]
    fn training_slice_standardizes_to_zero_mean_unit_sd() {
        let data = generate_synthetic(&GeneratorConfig {
            n_households: 80,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let recipe = FeatureRecipe::default();
        let train: BTreeSet<u32> = BTreeSet::from([1]);
        let state = fit_transforms(&data, &recipe, &train).unwrap();
        let matrix = apply_transforms(&state, &data).unwrap();

        let train_rows: Vec<usize> = (0..matrix.n_rows())
            .filter(|&i| matrix.keys[i].1 == 1)
            .collect();
        for (j, t) in state.columns.iter().enumerate() {
            if t.is_flag || t.constant {
                continue;
            }
            let values: Vec<f64> = train_rows.iter().map(|&i| matrix.row(i)[j]).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let sd =
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(mean.abs() <= 1e-9, "{}: mean {mean}", t.name);
            assert!((sd - 1.0).abs() <= 1e-9, "{}: sd {sd}", t.name);
        }
    }

    #[test]
    fn missing_cell_gets_median_and_flag() {
        let mut records = Vec::new();
        for h in 1..=4 {
            for r in 1..=2 {
                let mut rec = testkit::record(h, r);
                rec.inflation = Some(f64::from(h));
                records.push(rec);
            }
        }
        records[0].inflation = None; // household 1 round 1
        let data = crate::panel::PanelDataset::new(records).unwrap();
        let recipe = FeatureRecipe::default();
        let state = fit_transforms(&data, &recipe, &BTreeSet::from([1, 2])).unwrap();
        let matrix = apply_transforms(&state, &data).unwrap();
        let flag_col = matrix.column_index("miss_inflation").unwrap();
        let value_col = matrix.column_index("inflation").unwrap();
        assert_eq!(matrix.row(0)[flag_col], 1.0);
        assert!(matrix.row(1)[flag_col] == 0.0);
        // Imputed with the fitted median, then standardized like any cell.
        let t = &state.columns[value_col];
        let expected = (state.numeric_medians["inflation"] - t.mean) / t.sd;
        assert!((matrix.row(0)[value_col] - expected).abs() < 1e-12);
        assert!(!matrix.warnings.is_empty());
    }

    #[test]
    fn applying_the_same_state_twice_is_pure() {
        let data = generate_synthetic(&GeneratorConfig {
            n_households: 25,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let state = fit_transforms(&data, &FeatureRecipe::default(), &BTreeSet::from([1])).unwrap();
        let a = apply_transforms(&state, &data).unwrap();
        let b = apply_transforms(&state, &data).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn feature_rows_at_or_before_round_r_ignore_later_mutations() {
        let data = generate_synthetic(&GeneratorConfig {
            n_households: 30,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let recipe = FeatureRecipe::default();
        let train: BTreeSet<u32> = BTreeSet::from([1]);
        let state = fit_transforms(&data, &recipe, &train).unwrap();
        let baseline = apply_transforms(&state, &data).unwrap();

        for boundary in [1_u32, 2] {
            let mut records = data.records().to_vec();
            for rec in &mut records {
                if rec.round > boundary {
                    rec.inflation = Some(rec.inflation.unwrap() * 0.5 + 1.0);
                    rec.disaster_impact = Some(rec.disaster_impact.unwrap() + 3.0);
                    rec.cyber_incident_count = Some(rec.cyber_incident_count.unwrap() + 5);
                }
            }
            let mutated = crate::panel::PanelDataset::new(records).unwrap();
            let state_m = fit_transforms(&mutated, &recipe, &train).unwrap();
            let matrix = apply_transforms(&state_m, &mutated).unwrap();
            for i in 0..matrix.n_rows() {
                if matrix.keys[i].1 <= boundary {
                    let a: Vec<u64> = baseline.row(i).iter().map(|v| v.to_bits()).collect();
                    let b: Vec<u64> = matrix.row(i).iter().map(|v| v.to_bits()).collect();
                    assert_eq!(a, b, "row {i} changed (boundary {boundary})");
                }
            }
        }
    }

    #[test]
    fn feature_csv_round_trips() {
        let data = generate_synthetic(&GeneratorConfig {
            n_households: 12,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let state = fit_transforms(&data, &FeatureRecipe::default(), &BTreeSet::from([1])).unwrap();
        let matrix = apply_transforms(&state, &data).unwrap();
        let text = write_feature_csv_string(&matrix);
        let back = read_feature_csv_str(&text).unwrap();
        assert_eq!(back.keys, matrix.keys);
        assert_eq!(back.column_names, matrix.column_names);
        assert_eq!(back.target_binary, matrix.target_binary);
        // Values round-trip through the fixed 6-decimal formatting.
        let again = write_feature_csv_string(&back);
        assert_eq!(text, again);
    }
}
