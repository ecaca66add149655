use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvaluationError;
use crate::expr::{Compiled, Expr};
use crate::forge::Distribution;
use crate::system::TaskSpec;

/// Default number of evaluation points per task.
pub const DEFAULT_POINTS: usize = 5000;

/// Seeded ground-truth samples of one law.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationDataset {
    pub variables: Vec<String>,
    /// One row per point, columns in `variables` order.
    pub points: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub seed: u64,
}

impl EvaluationDataset {
    pub fn for_task(task: &TaskSpec, n: usize, seed: u64) -> Result<EvaluationDataset, EvaluationError> {
        sample_eval_inputs(&task.target, task.target_sampling(), n, seed)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn bindings(&self, i: usize) -> Vec<(String, f64)> {
        self.variables
            .iter()
            .cloned()
            .zip(self.points[i].iter().copied())
            .collect()
    }

    /// Compiles `expr` over this dataset's columns, extra slots appended.
    pub(crate) fn compile(&self, expr: &Expr, extra: &[String]) -> Result<Compiled, EvaluationError> {
        let slots: Vec<String> = self.variables.iter().chain(extra).cloned().collect();
        Compiled::new(expr, &slots).map_err(|e| EvaluationError::Variables(e.to_string()))
    }
}

/// Draws `n` points from the declared distributions, redrawing any point
/// whose ground truth is undefined or negative.
pub fn sample_eval_inputs(
    target: &Expr,
    sampling: &[(String, Distribution)],
    n: usize,
    seed: u64,
) -> Result<EvaluationDataset, EvaluationError> {
    if n == 0 {
        return Err(EvaluationError::Empty);
    }
    let variables: Vec<String> = sampling.iter().map(|(k, _)| k.clone()).collect();
    let compiled = Compiled::new(target, &variables).map_err(|e| EvaluationError::Variables(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut stack = Vec::new();
    let limit = 100 * n;
    let mut attempts = 0;
    while y.len() < n {
        if attempts == limit {
            return Err(EvaluationError::IllPosed { attempts });
        }
        attempts += 1;
        let row: Vec<f64> = sampling.iter().map(|(_, d)| d.sample(&mut rng)).collect();
        if let Some(v) = compiled.eval_with(&row, &mut stack).value() {
            if v >= 0.0 {
                points.push(row);
                y.push(v);
            }
        }
    }
    Ok(EvaluationDataset {
        variables,
        points,
        y,
        seed,
    })
}
