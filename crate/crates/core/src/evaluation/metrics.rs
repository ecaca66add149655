use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvaluationDataset, EvaluationError};
use crate::expr::Expr;

/// Default modified Z-score cut-off.
pub const Z_THRESHOLD: f64 = 3.5;

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Keep-mask for `|0.6745 (x - median) / MAD| <= threshold`. A zero MAD keeps
/// everything. Single pass.
pub fn modified_z_filter(values: &[f64], threshold: f64) -> Vec<bool> {
    if values.is_empty() {
        return Vec::new();
    }
    let med = median(&sorted(values.iter().copied()));
    let mad = median(&sorted(values.iter().map(|x| (x - med).abs())));
    if mad == 0.0 {
        return vec![true; values.len()];
    }
    values
        .iter()
        .map(|x| (0.6745 * (x - med) / mad).abs() <= threshold)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rmsle {
    /// `None` when fewer than half the points are usable.
    pub rmsle: Option<f64>,
    pub valid_fraction: f64,
    pub filtered_count: usize,
}

/// RMSLE against the dataset's ground truth. Points where the submission is
/// undefined or at most -1 are excluded; squared log errors pass through
/// the modified Z filter before averaging.
pub fn compute_rmsle(
    submission: &Expr,
    constants: &BTreeMap<String, f64>,
    dataset: &EvaluationDataset,
) -> Result<Rmsle, EvaluationError> {
    let values: Vec<(String, f64)> = constants.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let sub = submission.with_constant_values(&values);
    let compiled = dataset.compile(&sub, &[])?;
    let mut stack = Vec::new();
    let terms: Vec<f64> = dataset
        .points
        .iter()
        .zip(&dataset.y)
        .filter_map(|(row, y)| {
            let p = compiled.eval_with(row, &mut stack).value()?;
            (p > -1.0).then(|| (p.ln_1p() - y.ln_1p()).powi(2))
        })
        .collect();
    Ok(rmsle_from_terms(&terms, dataset.len()))
}

pub(crate) fn rmsle_from_terms(terms: &[f64], total: usize) -> Rmsle {
    let valid_fraction = terms.len() as f64 / total as f64;
    if valid_fraction < 0.5 || terms.is_empty() {
        return Rmsle {
            rmsle: None,
            valid_fraction,
            filtered_count: 0,
        };
    }
    let keep = modified_z_filter(terms, Z_THRESHOLD);
    let kept: Vec<f64> = terms.iter().zip(&keep).filter(|(_, k)| **k).map(|(t, _)| *t).collect();
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    Rmsle {
        rmsle: Some(mean.sqrt()),
        valid_fraction,
        filtered_count: terms.len() - kept.len(),
    }
}
