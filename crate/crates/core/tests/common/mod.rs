#![allow(dead_code)]

pub mod closed_forms;

use lawlab_core::evaluation::{sample_eval_inputs, symbolic_equivalent, EQUIV_TOL};
use lawlab_core::expr::{parse, Symbols};
use lawlab_core::forge::Distribution;

/// The judge's few-shot pairs: (target, submission, expected verdict).
/// Submissions inline their constants as the bridge does.
pub const JUDGE_PAIRS: [(&str, &str, bool); 7] = [
    ("(C * x1 * x2) ^ 2 / x3 ^ 2", "6.7e-05 * (x1 * x2) ^ 2 / x3 ^ 2", true),
    ("C * x1 * x2 / x3 ^ 2", "6.7e-05 * x1 / (x3 ^ 4 * x2)", false),
    (
        "sqrt(C * x1 * x2 ^ 2) / x3 ^ 2",
        "sqrt(6.7e-05 * x1) * x2 / x3 ^ 2",
        true,
    ),
    ("C * x1 * x2 / x3 ^ 2", "6.7e-05 * x1 * x2 / x3 ^ 2.02", false),
    ("C * x1 * x2 / x3 ^ 2", "6.7e-05 * (x1 * x2) / x3 ^ 2", true),
    ("C * log(x ^ 2)", "2.02 * log(x)", true),
    ("C * x1 * x2 / x3 ^ 2", "x1 * x2 / x3 ^ 2", true),
];

/// Verdict of the deterministic checker on one judge pair.
pub fn judge(target: &str, submission: &str) -> bool {
    let vars: &[&str] = if target.contains("x1") {
        &["x1", "x2", "x3"]
    } else {
        &["x"]
    };
    let syms = Symbols::new(vars.iter().copied(), ["C"]);
    let t = parse(target, &syms).unwrap();
    let s = parse(submission, &syms).unwrap();
    let sampling: Vec<(String, Distribution)> = vars
        .iter()
        .map(|v| (v.to_string(), Distribution::LogUniform { low: 2.0, high: 100.0 }))
        .collect();
    let data = sample_eval_inputs(&t, &sampling, 2000, 9).unwrap();
    symbolic_equivalent(&t, &s, &data, EQUIV_TOL).unwrap()
}
