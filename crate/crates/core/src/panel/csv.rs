//! Canonical panel CSV: UTF-8, comma-delimited, reals at 6 decimal places,
//! categoricals as literal strings, missing cells empty.

use super::{HouseholdRecord, Level, PanelDataset};
use crate::error::{Error, Result};
use std::path::Path;

pub const CSV_HEADER: &str = "household_id,round,gdp_growth,inflation,fx_change,volatility_index,liquidity_score,ict_demand,digital_switch_usage,iot_device_density,cyber_incident_count,sme_finance_score,household_borrowing_rate,disaster_impact,emergency_policy_score,disaster_severity_score,disaster_level,distress_label,severity_label";

fn fmt_real(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

/// Render a dataset to canonical CSV bytes.
pub fn write_panel_csv_string(data: &PanelDataset) -> String {
    let mut out = String::with_capacity(64 + data.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in data.records() {
        out.push_str(&rec.household_id.to_string());
        out.push(',');
        out.push_str(&rec.round.to_string());
        for real in [
            rec.gdp_growth,
            rec.inflation,
            rec.fx_change,
            rec.volatility_index,
            rec.liquidity_score,
            rec.ict_demand,
            rec.digital_switch_usage,
            rec.iot_device_density,
        ] {
            out.push(',');
            out.push_str(&fmt_real(real));
        }
        out.push(',');
        if let Some(c) = rec.cyber_incident_count {
            out.push_str(&c.to_string());
        }
        for real in [
            rec.sme_finance_score,
            rec.household_borrowing_rate,
            rec.disaster_impact,
            rec.emergency_policy_score,
            rec.disaster_severity_score,
        ] {
            out.push(',');
            out.push_str(&fmt_real(real));
        }
        out.push(',');
        if let Some(level) = rec.disaster_level {
            out.push_str(level.as_str());
        }
        out.push(',');
        out.push_str(&rec.distress_label.to_string());
        out.push(',');
        out.push_str(rec.severity_label.as_str());
        out.push('\n');
    }
    out
}

pub fn write_panel_csv(data: &PanelDataset, path: &Path) -> Result<()> {
    std::fs::write(path, write_panel_csv_string(data)).map_err(|e| Error::io(path, e))
}

struct Cell<'a> {
    line: usize,
    column: &'static str,
    raw: &'a str,
}

impl<'a> Cell<'a> {
    fn parse_error(&self, detail: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column.to_string(),
            detail: detail.into(),
        }
    }

    fn required_int<T: std::str::FromStr>(&self) -> Result<T> {
        self.raw
            .trim()
            .parse()
            .map_err(|_| self.parse_error(format!("cannot parse '{}' as integer", self.raw)))
    }

    fn optional_real(&self) -> Result<Option<f64>> {
        let trimmed = self.raw.trim();
        if trimmed.is_empty() {
            return Ok(None);
        }
        trimmed
            .parse::<f64>()
            .map(Some)
            .map_err(|_| self.parse_error(format!("cannot parse '{}' as real", self.raw)))
    }

    fn optional_count(&self) -> Result<Option<u32>> {
        let trimmed = self.raw.trim();
        if trimmed.is_empty() {
            return Ok(None);
        }
        trimmed
            .parse::<u32>()
            .map(Some)
            .map_err(|_| self.parse_error(format!("cannot parse '{}' as count", self.raw)))
    }

    fn optional_level(&self) -> Result<Option<Level>> {
        let trimmed = self.raw.trim();
        if trimmed.is_empty() {
            return Ok(None);
        }
        Level::parse(trimmed)
            .map(Some)
            .ok_or_else(|| self.parse_error(format!("unknown level '{}'", self.raw)))
    }

    fn required_level(&self) -> Result<Level> {
        self.optional_level()?
            .ok_or_else(|| self.parse_error("cell must not be empty"))
    }
}

/// Parse canonical panel CSV bytes into a sorted, validated dataset.
pub fn read_panel_csv_str(text: &str) -> Result<PanelDataset> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity("empty file: missing header row".to_string()))?;
    check_header(header)?;

    let names: Vec<&'static str> = CSV_HEADER.split(',').collect();

    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line: line_no,
                column: String::new(),
                detail: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let cell = |i: usize| Cell {
            line: line_no,
            column: names[i],
            raw: fields[i],
        };
        let distress_cell = cell(17);
        let distress: u8 = distress_cell.required_int()?;
        if distress > 1 {
            return Err(distress_cell.parse_error(format!("distress_label must be 0 or 1, got {distress}")));
        }
        records.push(HouseholdRecord {
            household_id: cell(0).required_int()?,
            round: cell(1).required_int()?,
            gdp_growth: cell(2).optional_real()?,
            inflation: cell(3).optional_real()?,
            fx_change: cell(4).optional_real()?,
            volatility_index: cell(5).optional_real()?,
            liquidity_score: cell(6).optional_real()?,
            ict_demand: cell(7).optional_real()?,
            digital_switch_usage: cell(8).optional_real()?,
            iot_device_density: cell(9).optional_real()?,
            cyber_incident_count: cell(10).optional_count()?,
            sme_finance_score: cell(11).optional_real()?,
            household_borrowing_rate: cell(12).optional_real()?,
            disaster_impact: cell(13).optional_real()?,
            emergency_policy_score: cell(14).optional_real()?,
            disaster_severity_score: cell(15).optional_real()?,
            disaster_level: cell(16).optional_level()?,
            distress_label: distress,
            severity_label: cell(18).required_level()?,
        });
    }
    PanelDataset::new(records)
}

pub fn read_panel_csv(path: &Path) -> Result<PanelDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_panel_csv_str(&text)
}

fn check_header(header: &str) -> Result<()> {
    let trimmed = header.trim_end_matches('\r');
    if trimmed == CSV_HEADER {
        return Ok(());
    }
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    let present: std::collections::BTreeSet<&str> = trimmed.split(',').collect();
    let missing: Vec<String> = expected
        .iter()
        .filter(|name| !present.contains(**name))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema { missing });
    }
    Err(Error::Integrity(
        "header columns out of canonical order or contain extras".to_string(),
    ))
}
