//! Canonical panel schema: household × monitoring-round records with raw
//! indicators and the two prediction targets.

mod csv;
mod generate;
mod summary;

pub use csv::{read_panel_csv, read_panel_csv_str, write_panel_csv, write_panel_csv_string, CSV_HEADER};
pub use generate::{generate_synthetic, severity_feature_weights, GeneratorConfig};
pub use summary::{summarize, CategoricalSummary, EdaSummary, HistogramBin, NumericSummary};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Three-level ordered category used by `disaster_level` and `severity_label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "Low",
            Level::Medium => "Medium",
            Level::High => "High",
        }
    }

    pub fn parse(s: &str) -> Option<Level> {
        match s {
            "Low" => Some(Level::Low),
            "Medium" => Some(Level::Medium),
            "High" => Some(Level::High),
            _ => None,
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Names of the numeric indicator columns, in canonical schema order.
pub const NUMERIC_COLUMNS: [&str; 14] = [
    "gdp_growth",
    "inflation",
    "fx_change",
    "volatility_index",
    "liquidity_score",
    "ict_demand",
    "digital_switch_usage",
    "iot_device_density",
    "cyber_incident_count",
    "sme_finance_score",
    "household_borrowing_rate",
    "disaster_impact",
    "emergency_policy_score",
    "disaster_severity_score",
];

/// The categorical indicator column.
pub const CATEGORICAL_COLUMN: &str = "disaster_level";

/// One household observed in one monitoring round. Indicator cells are
/// optional so that masked/missing values survive a CSV round trip; keys,
/// labels, and targets are always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdRecord {
    pub household_id: u32,
    pub round: u32,
    pub gdp_growth: Option<f64>,
    pub inflation: Option<f64>,
    pub fx_change: Option<f64>,
    pub volatility_index: Option<f64>,
    pub liquidity_score: Option<f64>,
    pub ict_demand: Option<f64>,
    pub digital_switch_usage: Option<f64>,
    pub iot_device_density: Option<f64>,
    pub cyber_incident_count: Option<u32>,
    pub sme_finance_score: Option<f64>,
    pub household_borrowing_rate: Option<f64>,
    pub disaster_impact: Option<f64>,
    pub emergency_policy_score: Option<f64>,
    pub disaster_severity_score: Option<f64>,
    pub disaster_level: Option<Level>,
    pub distress_label: u8,
    pub severity_label: Level,
}

impl HouseholdRecord {
    pub fn key(&self) -> (u32, u32) {
        (self.household_id, self.round)
    }

    /// Numeric cell by canonical column name; `None` when the cell is missing.
    pub fn numeric(&self, column: &str) -> Option<f64> {
        match column {
            "gdp_growth" => self.gdp_growth,
            "inflation" => self.inflation,
            "fx_change" => self.fx_change,
            "volatility_index" => self.volatility_index,
            "liquidity_score" => self.liquidity_score,
            "ict_demand" => self.ict_demand,
            "digital_switch_usage" => self.digital_switch_usage,
            "iot_device_density" => self.iot_device_density,
            "cyber_incident_count" => self.cyber_incident_count.map(f64::from),
            "sme_finance_score" => self.sme_finance_score,
            "household_borrowing_rate" => self.household_borrowing_rate,
            "disaster_impact" => self.disaster_impact,
            "emergency_policy_score" => self.emergency_policy_score,
            "disaster_severity_score" => self.disaster_severity_score,
            _ => None,
        }
    }

    /// Overwrite a numeric cell. Count columns are re-rounded to nonnegative
    /// integers.
    pub fn set_numeric(&mut self, column: &str, value: f64) -> Result<()> {
        let slot = match column {
            "gdp_growth" => &mut self.gdp_growth,
            "inflation" => &mut self.inflation,
            "fx_change" => &mut self.fx_change,
            "volatility_index" => &mut self.volatility_index,
            "liquidity_score" => &mut self.liquidity_score,
            "ict_demand" => &mut self.ict_demand,
            "digital_switch_usage" => &mut self.digital_switch_usage,
            "iot_device_density" => &mut self.iot_device_density,
            "cyber_incident_count" => {
                self.cyber_incident_count = Some(value.round().max(0.0) as u32);
                return Ok(());
            }
            "sme_finance_score" => &mut self.sme_finance_score,
            "household_borrowing_rate" => &mut self.household_borrowing_rate,
            "disaster_impact" => &mut self.disaster_impact,
            "emergency_policy_score" => &mut self.emergency_policy_score,
            "disaster_severity_score" => &mut self.disaster_severity_score,
            other => {
                return Err(Error::Shape(format!(
                    "unknown numeric column '{other}'"
                )))
            }
        };
        *slot = Some(value);
        Ok(())
    }

    pub fn clear_numeric(&mut self, column: &str) {
        match column {
            "gdp_growth" => self.gdp_growth = None,
            "inflation" => self.inflation = None,
            "fx_change" => self.fx_change = None,
            "volatility_index" => self.volatility_index = None,
            "liquidity_score" => self.liquidity_score = None,
            "ict_demand" => self.ict_demand = None,
            "digital_switch_usage" => self.digital_switch_usage = None,
            "iot_device_density" => self.iot_device_density = None,
            "cyber_incident_count" => self.cyber_incident_count = None,
            "sme_finance_score" => self.sme_finance_score = None,
            "household_borrowing_rate" => self.household_borrowing_rate = None,
            "disaster_impact" => self.disaster_impact = None,
            "emergency_policy_score" => self.emergency_policy_score = None,
            "disaster_severity_score" => self.disaster_severity_score = None,
            _ => {}
        }
    }
}

/// Current panel file schema tag.
pub const PANEL_SCHEMA_VERSION: &str = "panel-v1";

/// An immutable, validated panel: records sorted by (household_id, round).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    records: Vec<HouseholdRecord>,
    schema_version: String,
}

impl PanelDataset {
    /// Sorts, validates, and wraps a record collection.
    pub fn new(mut records: Vec<HouseholdRecord>) -> Result<PanelDataset> {
        records.sort_by_key(HouseholdRecord::key);
        validate_records(&records)?;
        Ok(PanelDataset {
            records,
            schema_version: PANEL_SCHEMA_VERSION.to_string(),
        })
    }

    pub fn records(&self) -> &[HouseholdRecord] {
        &self.records
    }

    pub fn schema_version(&self) -> &str {
        &self.schema_version
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rounds(&self) -> Vec<u32> {
        let mut rounds: Vec<u32> = self.records.iter().map(|r| r.round).collect();
        rounds.sort_unstable();
        rounds.dedup();
        rounds
    }

    pub fn n_households(&self) -> usize {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.household_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Records restricted to the given rounds, preserving order.
    pub fn filter_rounds(&self, rounds: &std::collections::BTreeSet<u32>) -> Vec<&HouseholdRecord> {
        self.records
            .iter()
            .filter(|r| rounds.contains(&r.round))
            .collect()
    }

    /// Rebuild after in-place editing (used by shock application and tests).
    pub fn with_records(self, records: Vec<HouseholdRecord>) -> Result<PanelDataset> {
        PanelDataset::new(records)
    }
}

fn validate_records(records: &[HouseholdRecord]) -> Result<()> {
    use std::collections::BTreeSet;
    let mut keys: BTreeSet<(u32, u32)> = BTreeSet::new();
    for rec in records {
        if rec.household_id < 1 {
            return Err(Error::Integrity(format!(
                "household_id must be >= 1, got {}",
                rec.household_id
            )));
        }
        if rec.round < 1 {
            return Err(Error::Integrity(format!(
                "round must be >= 1, got {} for household {}",
                rec.round, rec.household_id
            )));
        }
        if !keys.insert(rec.key()) {
            return Err(Error::Integrity(format!(
                "duplicate key: household {} round {}",
                rec.household_id, rec.round
            )));
        }
        if rec.distress_label > 1 {
            return Err(Error::Integrity(format!(
                "distress_label must be 0 or 1, got {} for household {} round {}",
                rec.distress_label, rec.household_id, rec.round
            )));
        }
        check_ranges(rec)?;
    }
    // Balanced panel: a household seen in round r > 1 must be in round r-1.
    for rec in records {
        if rec.round > 1 && !keys.contains(&(rec.household_id, rec.round - 1)) {
            return Err(Error::Integrity(format!(
                "unbalanced panel: household {} present in round {} but not round {}",
                rec.household_id,
                rec.round,
                rec.round - 1
            )));
        }
    }
    Ok(())
}

fn check_ranges(rec: &HouseholdRecord) -> Result<()> {
    let bounded01 = [
        ("liquidity_score", rec.liquidity_score),
        ("ict_demand", rec.ict_demand),
        ("digital_switch_usage", rec.digital_switch_usage),
        ("sme_finance_score", rec.sme_finance_score),
        ("emergency_policy_score", rec.emergency_policy_score),
    ];
    for (name, value) in bounded01 {
        if let Some(v) = value {
            if !v.is_finite() || !(0.0..=100.0).contains(&v) {
                return Err(Error::Integrity(format!(
                    "{name} must lie in [0, 100], got {v} for household {} round {}",
                    rec.household_id, rec.round
                )));
            }
        }
    }
    let nonneg = [
        ("volatility_index", rec.volatility_index),
        ("iot_device_density", rec.iot_device_density),
        ("household_borrowing_rate", rec.household_borrowing_rate),
        ("disaster_impact", rec.disaster_impact),
        ("disaster_severity_score", rec.disaster_severity_score),
    ];
    for (name, value) in nonneg {
        if let Some(v) = value {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Integrity(format!(
                    "{name} must be >= 0, got {v} for household {} round {}",
                    rec.household_id, rec.round
                )));
            }
        }
    }
    for (name, value) in [
        ("gdp_growth", rec.gdp_growth),
        ("inflation", rec.inflation),
        ("fx_change", rec.fx_change),
    ] {
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(Error::Integrity(format!(
                    "{name} must be finite for household {} round {}",
                    rec.household_id, rec.round
                )));
            }
        }
    }
    Ok(())
}

/// Quantize a real to the canonical 6-decimal CSV precision.
pub(crate) fn quantize6(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float reparses")
}
