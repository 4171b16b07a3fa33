//! Dense engineered design matrix aligned to (household_id, round) keys.

use crate::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub keys: Vec<(u32, u32)>,
    pub column_names: Vec<String>,
    /// Row-major, `keys.len() × column_names.len()`.
    pub values: Vec<f64>,
    pub target_binary: Vec<u8>,
    pub target_severity: Vec<u8>,
    pub warnings: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// New matrix containing only the given row indices, in order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let w = self.n_cols();
        let mut values = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            keys: indices.iter().map(|&i| self.keys[i]).collect(),
            column_names: self.column_names.clone(),
            values,
            target_binary: indices.iter().map(|&i| self.target_binary[i]).collect(),
            target_severity: indices.iter().map(|&i| self.target_severity[i]).collect(),
            warnings: Vec::new(),
        }
    }
}

/// Render to CSV with the same formatting rules as the panel file.
pub fn write_feature_csv_string(matrix: &FeatureMatrix) -> String {
    let mut out = String::new();
    out.push_str("household_id,round");
    for name in &matrix.column_names {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",target_binary,target_severity\n");
    for i in 0..matrix.n_rows() {
        let (h, r) = matrix.keys[i];
        out.push_str(&h.to_string());
        out.push(',');
        out.push_str(&r.to_string());
        for v in matrix.row(i) {
            out.push(',');
            out.push_str(&format!("{v:.6}"));
        }
        out.push(',');
        out.push_str(&matrix.target_binary[i].to_string());
        out.push(',');
        out.push_str(&matrix.target_severity[i].to_string());
        out.push('\n');
    }
    out
}

pub fn write_feature_csv(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, write_feature_csv_string(matrix)).map_err(|e| Error::io(path, e))
}

pub fn read_feature_csv_str(text: &str) -> Result<FeatureMatrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity("empty feature file: missing header".to_string()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 5
        || fields[0] != "household_id"
        || fields[1] != "round"
        || fields[fields.len() - 2] != "target_binary"
        || fields[fields.len() - 1] != "target_severity"
    {
        return Err(Error::Schema {
            missing: ["household_id", "round", "target_binary", "target_severity"]
                .iter()
                .filter(|k| !fields.contains(k))
                .map(|s| s.to_string())
                .collect(),
        });
    }
    let column_names: Vec<String> = fields[2..fields.len() - 2]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let width = fields.len();

    let mut matrix = FeatureMatrix {
        keys: Vec::new(),
        column_names,
        values: Vec::new(),
        target_binary: Vec::new(),
        target_severity: Vec::new(),
        warnings: Vec::new(),
    };
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(Error::Parse {
                line: line_no,
                column: String::new(),
                detail: format!("expected {width} fields, found {}", cells.len()),
            });
        }
        let parse_err = |column: &str, raw: &str| Error::Parse {
            line: line_no,
            column: column.to_string(),
            detail: format!("cannot parse '{raw}'"),
        };
        let h: u32 = cells[0]
            .parse()
            .map_err(|_| parse_err("household_id", cells[0]))?;
        let r: u32 = cells[1].parse().map_err(|_| parse_err("round", cells[1]))?;
        matrix.keys.push((h, r));
        for (j, raw) in cells[2..width - 2].iter().enumerate() {
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(&matrix.column_names[j], raw))?;
            matrix.values.push(v);
        }
        let tb: u8 = cells[width - 2]
            .parse()
            .map_err(|_| parse_err("target_binary", cells[width - 2]))?;
        let ts: u8 = cells[width - 1]
            .parse()
            .map_err(|_| parse_err("target_severity", cells[width - 1]))?;
        matrix.target_binary.push(tb);
        matrix.target_severity.push(ts);
    }
    Ok(matrix)
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_feature_csv_str(&text)
}
