//! Dense Levenberg-Marquardt least squares for a handful of parameters.

use crate::expr::{Compiled, EvalError, Expr};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: f64,
    /// Stop when the cost itself falls below this.
    pub cost_floor: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-16,
            xtol: 1e-15,
            cost_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Half the sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
}

fn half_norm2(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Minimizes `0.5 * |r(x)|^2` where `residuals(x, r)` fills `m` residuals.
/// The Jacobian is taken by forward differences. Non-finite costs are
/// treated as worse than any finite one.
pub fn levenberg_marquardt<F>(mut residuals: F, x0: &[f64], m: usize, opts: LmOptions) -> LmOutcome
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&x, &mut r);
    let mut cost = finite_or_max(half_norm2(&r));
    if n == 0 {
        return LmOutcome {
            params: x,
            cost,
            iterations: 0,
        };
    }
    let mut lambda = 1e-3;
    let mut jac = vec![0.0; m * n];
    let mut probe = vec![0.0; m];
    let mut trial = vec![0.0; n];
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations && cost > opts.cost_floor {
        iterations += 1;
        for j in 0..n {
            let h = 1e-7 * x[j].abs().max(1.0);
            trial.copy_from_slice(&x);
            trial[j] += h;
            residuals(&trial, &mut probe);
            for i in 0..m {
                let d = (probe[i] - r[i]) / h;
                jac[i * n + j] = if d.is_finite() { d } else { 0.0 };
            }
        }
        let mut a = vec![0.0; n * n];
        let mut g = vec![0.0; n];
        for i in 0..m {
            let row = &jac[i * n..(i + 1) * n];
            for p in 0..n {
                g[p] += row[p] * r[i];
                for q in 0..n {
                    a[p * n + q] += row[p] * row[q];
                }
            }
        }
        if g.iter().all(|v| *v == 0.0) {
            break;
        }
        loop {
            let mut damped = a.clone();
            for p in 0..n {
                let d = a[p * n + p];
                damped[p * n + p] += lambda * if d > 0.0 { d } else { 1.0 };
            }
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            if let Some(step) = solve(&mut damped, neg_g, n) {
                for j in 0..n {
                    trial[j] = x[j] + step[j];
                }
                residuals(&trial, &mut probe);
                let new_cost = finite_or_max(half_norm2(&probe));
                if new_cost < cost {
                    let decrease = (cost - new_cost) / cost;
                    let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
                    let x_norm = x.iter().map(|s| s * s).sum::<f64>().sqrt();
                    x.copy_from_slice(&trial);
                    std::mem::swap(&mut r, &mut probe);
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-15);
                    if decrease < opts.ftol || step_norm <= opts.xtol * (x_norm + opts.xtol) {
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break 'outer;
            }
        }
    }
    LmOutcome {
        params: x,
        cost,
        iterations,
    }
}

fn finite_or_max(c: f64) -> f64 {
    if c.is_finite() {
        c
    } else {
        f64::MAX
    }
}

/// Gaussian elimination with partial pivoting on a dense `n x n` system.
fn solve(a: &mut [f64], mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-300 || !a[pivot * n + col].is_finite() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Residual charged where the model is undefined or not positive.
const LOG_PENALTY: f64 = 50.0;
/// First-pass floor, relative to the median observation.
const SMOOTHING: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamFit {
    pub values: Vec<f64>,
    /// Half the sum of squared log residuals.
    pub cost: f64,
}

/// Fits the constants `params` of `expr` so that `ln expr(row)` matches
/// `ln observed` in least squares. `observed` must be positive. Each start
/// fixes the sign of every parameter; magnitudes are fitted in log space
/// (a zero start is fitted directly). Returns the best start.
pub fn fit_log_space(
    expr: &Expr,
    vars: &[String],
    params: &[String],
    rows: &[Vec<f64>],
    observed: &[f64],
    starts: &[Vec<f64>],
    opts: LmOptions,
) -> Result<Option<ParamFit>, EvalError> {
    let slots: Vec<String> = vars.iter().chain(params).cloned().collect();
    let compiled = Compiled::new(expr, &slots)?;
    let mut sorted = observed.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Values near zero make pure log residuals explode as a fit moves the
    // zero crossing; a first pass on ln(v + floor) smooths that barrier.
    let floor = SMOOTHING * sorted.get(sorted.len() / 2).copied().unwrap_or(1.0);
    let nv = vars.len();
    let mut best: Option<ParamFit> = None;
    for start in starts {
        let signs: Vec<f64> = start.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
        let decode = |phi: &[f64], out: &mut [f64]| {
            for k in 0..phi.len() {
                out[k] = if signs[k] == 0.0 {
                    phi[k]
                } else {
                    signs[k] * phi[k].exp()
                };
            }
        };
        let mut input = vec![0.0; nv + params.len()];
        let mut stack = Vec::new();
        let mut residuals = |phi: &[f64], r: &mut [f64], delta: f64| {
            decode(phi, &mut input[nv..]);
            for (i, row) in rows.iter().enumerate() {
                input[..nv].copy_from_slice(row);
                r[i] = match compiled.eval_with(&input, &mut stack).value() {
                    Some(v) if v > 0.0 => (v + delta).ln() - (observed[i] + delta).ln(),
                    _ => LOG_PENALTY,
                };
            }
        };
        let x0: Vec<f64> = start
            .iter()
            .map(|v| if *v == 0.0 { 0.0 } else { v.abs().ln() })
            .collect();
        let smooth = levenberg_marquardt(|p, r| residuals(p, r, floor), &x0, rows.len(), opts);
        let polished = levenberg_marquardt(|p, r| residuals(p, r, 0.0), &smooth.params, rows.len(), opts);
        let mut r = vec![0.0; rows.len()];
        residuals(&smooth.params, &mut r, 0.0);
        let smooth_cost = finite_or_max(half_norm2(&r));
        let (phi, cost) = if polished.cost <= smooth_cost {
            (polished.params, polished.cost)
        } else {
            (smooth.params, smooth_cost)
        };
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            let mut values = vec![0.0; params.len()];
            decode(&phi, &mut values);
            best = Some(ParamFit { values, cost });
            if cost <= opts.cost_floor {
                break;
            }
        }
    }
    Ok(best)
}
