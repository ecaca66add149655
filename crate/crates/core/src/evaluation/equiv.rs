use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvaluationDataset, EvaluationError};
use crate::expr::Expr;
use crate::fit::{fit_log_space, LmOptions};

/// Points used to fit, and separately to verify, the target constants.
pub const FIT_POINTS: usize = 512;
/// Relative residual below which two laws are judged equivalent.
pub const EQUIV_TOL: f64 = 1e-6;
pub const FIT_STARTS: usize = 8;
/// Half-width, in natural-log units, of the start spread around each default.
const START_SPREAD: f64 = 18.0;
const AXIS_OFFSET: f64 = 7.0;
const LITERAL_STARTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub constants: BTreeMap<String, f64>,
    /// Max relative discrepancy on the held-out points; `None` when the fit
    /// failed or the submission is undefined where the target is not.
    pub residual: Option<f64>,
}

/// Relative gap that is zero for equal values and bounded by 2.
pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn split(n: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let half = (n / 2).min(FIT_POINTS);
    (0..half, half..(2 * half).min(n))
}

/// Fits the target's hidden constants to reproduce the submission and
/// reports how well the best fit holds on disjoint points.
pub fn fit_hidden_constants(
    target: &Expr,
    submission: &Expr,
    dataset: &EvaluationDataset,
) -> Result<ConstantFit, EvaluationError> {
    let names = target.constant_names();
    let defaults: Vec<f64> = target.constants().iter().map(|c| c.default_value).collect();
    let sub = dataset.compile(submission, &[])?;
    let (fit_range, hold_range) = split(dataset.len());
    let mut stack = Vec::new();
    let sub_values: Vec<Option<f64>> = dataset.points[fit_range.start..hold_range.end]
        .iter()
        .map(|row| sub.eval_with(row, &mut stack).value())
        .collect();
    let failed = ConstantFit {
        constants: names.iter().cloned().zip(defaults.iter().copied()).collect(),
        residual: None,
    };
    // The target is defined on every dataset point.
    if sub_values.iter().any(Option::is_none) {
        return Ok(failed);
    }
    let sub_values: Vec<f64> = sub_values.into_iter().map(Option::unwrap).collect();

    let (rows, observed): (Vec<Vec<f64>>, Vec<f64>) = fit_range
        .clone()
        .filter(|&i| sub_values[i] > 0.0)
        .map(|i| (dataset.points[i].clone(), sub_values[i]))
        .unzip();
    if rows.len() < names.len().max(1) {
        return Ok(failed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(dataset.seed ^ 0x5eed);
    let mut starts = vec![defaults.clone()];
    // A submission that names the target's constants suggests their values.
    let named: Vec<f64> = names
        .iter()
        .zip(&defaults)
        .map(|(n, d)| {
            submission
                .constants()
                .iter()
                .find(|c| &c.name == n && c.default_value != 0.0)
                .map_or(*d, |c| c.default_value)
        })
        .collect();
    if named != defaults {
        starts.push(named);
    }
    // Literals the target lacks are likely inlined constant values.
    let own = target.literals();
    for lit in submission.literals() {
        if lit == 0.0 || own.iter().any(|v| v.to_bits() == lit.to_bits()) {
            continue;
        }
        for k in 0..defaults.len() {
            if starts.len() < LITERAL_STARTS {
                let mut s = defaults.clone();
                s[k] = lit;
                starts.push(s);
            }
        }
    }
    // One constant at a time, three decades either way.
    for k in 0..defaults.len() {
        for offset in [-AXIS_OFFSET, AXIS_OFFSET] {
            let mut s = defaults.clone();
            s[k] *= offset.exp();
            starts.push(s);
        }
    }
    while starts.len() < FIT_STARTS {
        starts.push(
            defaults
                .iter()
                .map(|d| {
                    let base = if *d == 0.0 { 1.0 } else { *d };
                    base * rng.random_range(-START_SPREAD..START_SPREAD).exp()
                })
                .collect(),
        );
    }
    let opts = LmOptions {
        cost_floor: 1e-28 * rows.len() as f64,
        ..LmOptions::default()
    };
    let Some(best) = fit_log_space(target, &dataset.variables, &names, &rows, &observed, &starts, opts)
        .map_err(|e| EvaluationError::Variables(e.to_string()))?
    else {
        return Ok(failed);
    };
    let constants: BTreeMap<String, f64> = names.iter().cloned().zip(best.values.iter().copied()).collect();

    let fitted = target.with_constant_values(&names.iter().cloned().zip(best.values).collect::<Vec<_>>());
    let compiled = dataset.compile(&fitted, &[])?;
    let mut residual = 0.0f64;
    for i in hold_range.clone() {
        let Some(t) = compiled.eval_with(&dataset.points[i], &mut stack).value() else {
            return Ok(ConstantFit {
                constants,
                residual: None,
            });
        };
        residual = residual.max(relative_gap(t, sub_values[i - fit_range.start]));
    }
    Ok(ConstantFit {
        constants,
        residual: Some(residual),
    })
}

/// Whether `submission` equals `target` for some choice of the target's
/// hidden constants, to relative tolerance `tol` on held-out points.
pub fn symbolic_equivalent(
    target: &Expr,
    submission: &Expr,
    dataset: &EvaluationDataset,
    tol: f64,
) -> Result<bool, EvaluationError> {
    let fit = fit_hidden_constants(target, submission, dataset)?;
    Ok(fit.residual.is_some_and(|r| r < tol))
}
