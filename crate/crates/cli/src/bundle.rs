//! Readers for the estimate bundle: a per-visit effects CSV and a matching
//! headerless covariance CSV.

use std::path::Path;

use ppr_core::covariance::{effect_covariance, CovarianceSpec, Matrix};
use ppr_core::error::{PprError, Result};
use ppr_core::estimands::EstimateBundle;
use ppr_core::weights::TimeGrid;

fn parse_field(raw: &str, row: usize, col: usize) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| PprError::Parse {
        row,
        col,
        message: format!("expected a number, got '{}'", raw.trim()),
    })
}

/// CSV with header `t,delta`: one row per visit, times strictly increasing
/// from 0 to 1.
pub fn read_effects(path: &Path) -> Result<(TimeGrid, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut effects = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "t,delta" => {}
        Some((_, header)) => {
            return Err(PprError::Parse {
                row: 1,
                col: 1,
                message: format!("expected header 't,delta', got '{}'", header.trim()),
            })
        }
        None => {
            return Err(PprError::Parse {
                row: 1,
                col: 1,
                message: "effects file is empty".to_string(),
            })
        }
    }
    for (idx, line) in lines {
        let row = idx + 1;
        let line = line.trim_end_matches('\r');
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(PprError::Parse {
                row,
                col: fields.len(),
                message: format!("expected 2 fields, got {}", fields.len()),
            });
        }
        times.push(parse_field(fields[0], row, 1)?);
        effects.push(parse_field(fields[1], row, 2)?);
    }
    let grid = TimeGrid::new(times)?;
    Ok((grid, effects))
}

/// Headerless m x m covariance CSV aligned with the effects grid.
pub fn read_covariance(path: &Path, m: usize) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim_end_matches('\r');
        let mut values = Vec::new();
        for (j, field) in line.split(',').enumerate() {
            values.push(parse_field(field, row, j + 1)?);
        }
        rows.push(values);
    }
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        let got = if rows.len() != m {
            rows.len()
        } else {
            rows.iter().map(|r| r.len()).find(|&l| l != m).unwrap()
        };
        return Err(PprError::GridMismatch { expected: m, got });
    }
    Matrix::from_rows(rows)
}

/// Reads both files, symmetrizes fp-level asymmetry in the covariance, and
/// validates it positive definite on the effects grid.
pub fn load_bundle(effects_path: &Path, cov_path: &Path) -> Result<EstimateBundle> {
    let (grid, effects) = read_effects(effects_path)?;
    let matrix = read_covariance(cov_path, grid.len())?;
    let spec = CovarianceSpec::unstructured(matrix)?;
    let sigma = effect_covariance(&spec, &grid)?;
    EstimateBundle::new(effects, sigma)
}
