//! Tabular dataset ingestion with column validation and standardization.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::path::Path;

/// Target domain implied by the chosen observation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TargetKind {
    /// Real-valued targets; standardized alongside the predictors.
    Continuous,
    /// Targets in {0, 1}.
    Binary,
    /// Non-negative integer targets.
    Count,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub target_kind: TargetKind,
    /// Per-column (mean, sd) applied to the predictors; None when raw.
    pub x_transform: Option<Vec<(f64, f64)>>,
    /// (mean, sd) applied to the target; only for Continuous targets.
    pub y_transform: Option<(f64, f64)>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Map a standardized prediction back to the raw target scale.
    pub fn destandardize_target(&self, value: f64) -> f64 {
        match self.y_transform {
            Some((m, s)) => value * s + m,
            None => value,
        }
    }

    /// Map a raw-scale query point into the model's standardized coordinates.
    pub fn standardize_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.d() {
            return Err(Error::Data(format!(
                "query has {} coordinates, dataset has {}",
                raw.len(),
                self.d()
            )));
        }
        Ok(match &self.x_transform {
            Some(t) => raw.iter().zip(t).map(|(v, (m, s))| (v - m) / s).collect(),
            None => raw.to_vec(),
        })
    }
}

fn validate_target(kind: TargetKind, value: f64, row: usize) -> Result<()> {
    let ok = match kind {
        TargetKind::Continuous => value.is_finite(),
        TargetKind::Binary => value == 0.0 || value == 1.0,
        TargetKind::Count => value.is_finite() && value >= 0.0 && value.fract() == 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "target value {value} at data row {} is outside the {kind:?} domain",
            row + 1
        )))
    }
}

/// Build a dataset from already-parsed columns, standardizing predictors
/// (and Continuous targets) unless `standardize` is false.
pub fn build_dataset(
    x: DMatrix<f64>,
    y: DVector<f64>,
    feature_names: Vec<String>,
    target_name: String,
    target_kind: TargetKind,
    standardize: bool,
) -> Result<Dataset> {
    let n = x.nrows();
    let d = x.ncols();
    if n < 2 {
        return Err(Error::Data("need at least 2 rows".into()));
    }
    if y.len() != n || feature_names.len() != d {
        return Err(Error::Data("column metadata does not match matrix shape".into()));
    }
    for i in 0..n {
        validate_target(target_kind, y[i], i)?;
    }
    let mut x = x;
    let mut y = y;
    let mut x_transform = None;
    let mut y_transform = None;
    if standardize {
        let mut transform = Vec::with_capacity(d);
        for j in 0..d {
            let mean = x.column(j).mean();
            let sd = (x.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (n as f64 - 1.0))
                .sqrt();
            if sd <= 0.0 {
                return Err(Error::Data(format!(
                    "column '{}' is constant and cannot be standardized",
                    feature_names[j]
                )));
            }
            for i in 0..n {
                x[(i, j)] = (x[(i, j)] - mean) / sd;
            }
            transform.push((mean, sd));
        }
        x_transform = Some(transform);
        if target_kind == TargetKind::Continuous {
            let mean = y.mean();
            let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            if sd <= 0.0 {
                return Err(Error::Data(format!("target column '{target_name}' is constant")));
            }
            y = y.map(|v| (v - mean) / sd);
            y_transform = Some((mean, sd));
        }
    }
    Ok(Dataset { x, y, feature_names, target_name, target_kind, x_transform, y_transform })
}

/// Read a header-row CSV, split off the named target column, validate every
/// cell, and standardize. Parse failures name the offending row and column.
pub fn ingest_csv(
    path: &Path,
    target_column: &str,
    target_kind: TargetKind,
    standardize: bool,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::Data(format!("target column '{target_column}' not in header")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "data row {} has {} fields, header has {}",
                i + 1,
                record.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "non-numeric value '{}' at data row {}, column '{}'",
                    cell.trim(),
                    i + 1,
                    headers[j]
                ))
            })?;
            if j == target_idx {
                targets.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("CSV contains no data rows".into()));
    }
    let n = rows.len();
    let d = feature_names.len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let y = DVector::from_vec(targets);
    build_dataset(x, y, feature_names, target_column.to_string(), target_kind, standardize)
}
