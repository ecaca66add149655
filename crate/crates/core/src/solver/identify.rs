use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CandidateStructure;
use crate::evaluation::relative_gap;
use crate::expr::{Compiled, Expr, Node, Op};
use crate::fit::{fit_log_space, LmOptions};
use crate::forge::EXPONENTS;

/// Acceptance threshold on the max relative residual for noiseless data.
pub const NOISELESS_TOL: f64 = 1e-8;
/// Noisy acceptance threshold in units of sigma.
pub const NOISE_TOL_FACTOR: f64 = 5.0;
/// Fitted exponents this close to a palette value are snapped to it.
pub const SNAP_TOL: f64 = 1e-3;
const AXIS_OFFSET: f64 = 7.0;
const RANDOM_STARTS: usize = 3;
const START_SPREAD: f64 = 10.0;

pub fn acceptance_tolerance(sigma: f64) -> f64 {
    if sigma == 0.0 {
        NOISELESS_TOL
    } else {
        NOISE_TOL_FACTOR * sigma
    }
}

/// Target observations: `values[i]` was measured at `points[i]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observations {
    pub variables: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl Observations {
    pub fn new(variables: Vec<String>) -> Observations {
        Observations {
            variables,
            ..Observations::default()
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, point: Vec<f64>, value: f64) {
        self.points.push(point);
        self.values.push(value);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureFit {
    /// Fitted value of every parameter that was not snapped.
    pub params: Vec<(String, f64)>,
    /// Parameters replaced by a palette exponent.
    pub snapped: Vec<(String, f64)>,
    /// Max relative error over the data; infinite when the fit failed.
    pub residual: f64,
    /// The structure with fitted values written in as literals.
    pub law: Expr,
}

impl StructureFit {
    pub fn accepted(&self, sigma: f64) -> bool {
        self.residual < acceptance_tolerance(sigma)
    }
}

/// Max relative error of `law` over the data; infinite if it is undefined
/// anywhere.
pub fn max_relative_error(law: &Expr, data: &Observations) -> f64 {
    let Ok(compiled) = Compiled::new(law, &data.variables) else {
        return f64::INFINITY;
    };
    let mut stack = Vec::new();
    let mut worst = 0.0f64;
    for (p, z) in data.points.iter().zip(&data.values) {
        match compiled.eval_with(p, &mut stack).value() {
            Some(v) => worst = worst.max(relative_gap(v, *z)),
            None => return f64::INFINITY,
        }
    }
    worst
}

fn exponent_params(tree: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    tree.root().visit(&mut |n| {
        if let Node::Apply(Op::Pow, args) = n {
            if let Node::Const(c) = &args[1] {
                out.push(c.name.clone());
            }
        }
    });
    out
}

fn replace_with_literal(tree: &Expr, name: &str, value: f64) -> Expr {
    let mut root = tree.root().clone();
    root.visit_mut(&mut |n| {
        if matches!(n, Node::Const(c) if c.name == name) {
            *n = Node::Lit(value);
        }
    });
    Expr::new(root).expect("replacing a leaf keeps the tree valid")
}

fn starts(defaults: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut out = vec![defaults.to_vec()];
    for k in 0..defaults.len() {
        for offset in [-AXIS_OFFSET, AXIS_OFFSET] {
            let mut s = defaults.to_vec();
            s[k] *= offset.exp();
            out.push(s);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_STARTS {
        out.push(
            defaults
                .iter()
                .map(|d| {
                    let base = if *d == 0.0 { 1.0 } else { *d };
                    base * rng.random_range(-START_SPREAD..START_SPREAD).exp()
                })
                .collect(),
        );
    }
    out
}

/// Fits `tree`'s parameters in log space; returns the values and the max
/// relative error.
fn fit_tree(tree: &Expr, params: &[String], starts: &[Vec<f64>], data: &Observations) -> (Vec<f64>, f64) {
    let fallback = starts[0].clone();
    let (rows, observed): (Vec<Vec<f64>>, Vec<f64>) = data
        .points
        .iter()
        .zip(&data.values)
        .filter(|(_, z)| **z > 0.0)
        .map(|(p, z)| (p.clone(), *z))
        .unzip();
    if rows.is_empty() {
        return (fallback, f64::INFINITY);
    }
    let opts = LmOptions {
        cost_floor: 1e-30 * rows.len() as f64,
        ..LmOptions::default()
    };
    let values = match fit_log_space(tree, &data.variables, params, &rows, &observed, starts, opts) {
        Ok(Some(fit)) => fit.values,
        _ => return (fallback, f64::INFINITY),
    };
    let pairs: Vec<(String, f64)> = params.iter().cloned().zip(values.iter().copied()).collect();
    let residual = max_relative_error(&tree.with_constant_values(&pairs).inline_constants(), data);
    (values, residual)
}

/// Least squares in log space from several starts, then exponent snapping.
pub fn fit_structure(candidate: &CandidateStructure, data: &Observations, sigma: f64) -> StructureFit {
    let mut tree = candidate.tree.clone();
    let mut params = candidate.params();
    let defaults = candidate.defaults();
    let failed = |tree: &Expr| StructureFit {
        params: Vec::new(),
        snapped: Vec::new(),
        residual: f64::INFINITY,
        law: tree.inline_constants(),
    };
    if data.len() < params.len() || data.is_empty() {
        return failed(&tree);
    }
    let (mut values, mut residual) = fit_tree(&tree, &params, &starts(&defaults, candidate.id as u64), data);
    let mut snapped = Vec::new();
    if residual.is_finite() {
        let tol = acceptance_tolerance(sigma);
        for name in exponent_params(&tree) {
            let Some(k) = params.iter().position(|p| *p == name) else {
                continue;
            };
            let nearest = EXPONENTS
                .iter()
                .copied()
                .min_by(|a, b| (a - values[k]).abs().total_cmp(&(b - values[k]).abs()))
                .expect("palette is non-empty");
            if (nearest - values[k]).abs() > SNAP_TOL {
                continue;
            }
            let trial = replace_with_literal(&tree, &name, nearest);
            let mut rest = params.clone();
            let mut start = values.clone();
            rest.remove(k);
            start.remove(k);
            let (v, r) = fit_tree(&trial, &rest, &[start], data);
            if r <= tol.max(residual) {
                tree = trial;
                params = rest;
                values = v;
                residual = r;
                snapped.push((name, nearest));
            }
        }
    }
    let pairs: Vec<(String, f64)> = params.into_iter().zip(values).collect();
    let law = tree.with_constant_values(&pairs).inline_constants();
    if !residual.is_finite() {
        return failed(&tree);
    }
    StructureFit {
        params: pairs,
        snapped,
        residual,
        law,
    }
}
