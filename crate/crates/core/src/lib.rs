//! Early-warning pipeline for household financial distress.
//!
//! The crate covers the full workflow: seeded synthetic panel generation,
//! leakage-safe feature engineering, from-scratch classifiers (logistic
//! regression, CART, random forest, second-order boosted trees), exact
//! tree-ensemble SHAP explanations, temporal evaluation with imbalance-aware
//! metrics, probability calibration, and shock/drift robustness analysis.
//!
//! `pipeline` wires the stages into config-driven commands producing
//! deterministic file artifacts; the `ews` binary exposes them on the
//! command line.

pub mod config;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod models;
pub mod panel;
pub mod pipeline;
pub mod stress;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testkit {
    use crate::panel::{HouseholdRecord, Level, PanelDataset};

    /// Fully-populated record with bland defaults; tests override what they
    /// exercise.
    pub fn record(household_id: u32, round: u32) -> HouseholdRecord {
        HouseholdRecord {
            household_id,
            round,
            gdp_growth: Some(3.0),
            inflation: Some(6.0),
            fx_change: Some(0.5),
            volatility_index: Some(20.0),
            liquidity_score: Some(55.0),
            ict_demand: Some(50.0),
            digital_switch_usage: Some(52.0),
            iot_device_density: Some(3.0),
            cyber_incident_count: Some(1),
            sme_finance_score: Some(60.0),
            household_borrowing_rate: Some(8.0),
            disaster_impact: Some(2.0),
            emergency_policy_score: Some(50.0),
            disaster_severity_score: Some(2.5),
            disaster_level: Some(Level::Medium),
            distress_label: 0,
            severity_label: Level::Low,
        }
    }

    pub fn balanced_panel(
        n_households: u32,
        n_rounds: u32,
        mut tweak: impl FnMut(&mut HouseholdRecord),
    ) -> PanelDataset {
        let mut records = Vec::new();
        for h in 1..=n_households {
            for r in 1..=n_rounds {
                let mut rec = record(h, r);
                tweak(&mut rec);
                records.push(rec);
            }
        }
        PanelDataset::new(records).expect("test panel is valid")
    }
}
