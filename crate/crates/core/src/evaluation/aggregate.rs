use serde::{Deserialize, Serialize};

use super::{EvaluationError, EvaluationReport};

/// Summary of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    /// Number of runs (groups) aggregated.
    pub runs: usize,
    /// Reports across all runs.
    pub reports: usize,
    /// Mean symbolic accuracy in percent across runs.
    pub sa_mean: f64,
    /// Population standard deviation of the per-run accuracy.
    pub sa_std: f64,
    /// Mean and population std of the finite RMSLE values.
    pub rmsle_mean: Option<f64>,
    pub rmsle_std: Option<f64>,
    /// Reports whose RMSLE is the infinite sentinel.
    pub rmsle_infinite: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates runs, each a group of reports: the accuracy of a run is the
/// percentage of its reports judged equivalent.
pub fn aggregate_runs<R: AsRef<[EvaluationReport]>>(runs: &[R]) -> Result<CellSummary, EvaluationError> {
    if runs.is_empty() || runs.iter().any(|r| r.as_ref().is_empty()) {
        return Err(EvaluationError::EmptyGroup);
    }
    let per_run: Vec<f64> = runs
        .iter()
        .map(|r| {
            let r = r.as_ref();
            100.0 * r.iter().filter(|x| x.symbolic_accuracy).count() as f64 / r.len() as f64
        })
        .collect();
    let (sa_mean, sa_std) = mean_std(&per_run);
    let all: Vec<&EvaluationReport> = runs.iter().flat_map(|r| r.as_ref()).collect();
    let finite: Vec<f64> = all.iter().filter_map(|r| r.rmsle).collect();
    let (rmsle_mean, rmsle_std) = if finite.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&finite);
        (Some(m), Some(s))
    };
    Ok(CellSummary {
        runs: runs.len(),
        reports: all.len(),
        sa_mean,
        sa_std,
        rmsle_mean,
        rmsle_std,
        rmsle_infinite: all.len() - finite.len(),
    })
}

/// Treats every report as its own run.
pub fn aggregate_results(reports: &[EvaluationReport]) -> Result<CellSummary, EvaluationError> {
    let runs: Vec<&[EvaluationReport]> = reports.chunks(1).collect();
    aggregate_runs(&runs)
}
