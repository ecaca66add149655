//! Scoring: constant-absorbing equivalence, RMSLE and aggregation.

mod aggregate;
mod dataset;
mod equiv;
mod metrics;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::system::TaskSpec;

pub use aggregate::{aggregate_results, aggregate_runs, CellSummary};
pub use dataset::{sample_eval_inputs, EvaluationDataset, DEFAULT_POINTS};
pub(crate) use equiv::relative_gap;
pub use equiv::{fit_hidden_constants, symbolic_equivalent, ConstantFit, EQUIV_TOL, FIT_POINTS, FIT_STARTS};
pub use metrics::{compute_rmsle, modified_z_filter, Rmsle, Z_THRESHOLD};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluationError {
    #[error("dataset size must be positive")]
    Empty,
    #[error("no valid ground truth after {attempts} draws; the law is ill-posed on its domain")]
    IllPosed { attempts: usize },
    #[error("{0}")]
    Variables(String),
    #[error("cannot aggregate an empty group")]
    EmptyGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub symbolic_accuracy: bool,
    pub fitted_constants: BTreeMap<String, f64>,
    /// `None` is the infinite sentinel.
    pub fit_residual: Option<f64>,
    /// `None` is the infinite sentinel.
    pub rmsle: Option<f64>,
    pub valid_fraction: f64,
    pub filtered_count: usize,
}

impl EvaluationReport {
    /// Report for a run that never produced a law.
    pub fn missing() -> EvaluationReport {
        EvaluationReport {
            symbolic_accuracy: false,
            fitted_constants: BTreeMap::new(),
            fit_residual: None,
            rmsle: None,
            valid_fraction: 0.0,
            filtered_count: 0,
        }
    }
}

/// Scores `submission` against `target` on `dataset`.
pub fn evaluate_submission(
    target: &Expr,
    submission: &Expr,
    dataset: &EvaluationDataset,
    tol: f64,
) -> Result<EvaluationReport, EvaluationError> {
    let fit = fit_hidden_constants(target, submission, dataset)?;
    let rmsle = compute_rmsle(submission, &BTreeMap::new(), dataset)?;
    Ok(EvaluationReport {
        symbolic_accuracy: fit.residual.is_some_and(|r| r < tol),
        fitted_constants: fit.constants,
        fit_residual: fit.residual,
        rmsle: rmsle.rmsle,
        valid_fraction: rmsle.valid_fraction,
        filtered_count: rmsle.filtered_count,
    })
}

/// Scores a task's submission on its default seeded dataset.
pub fn evaluate_task(
    task: &TaskSpec,
    submission: &Expr,
    n: usize,
    seed: u64,
) -> Result<EvaluationReport, EvaluationError> {
    let dataset = EvaluationDataset::for_task(task, n, seed)?;
    evaluate_submission(&task.target, submission, &dataset, EQUIV_TOL)
}
