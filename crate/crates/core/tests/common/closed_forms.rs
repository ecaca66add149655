//! Independent closed forms of every catalog equation.

use std::collections::BTreeMap;

use lawlab_core::expr::Expr;
use lawlab_core::forge::{shipped_catalog, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SAMPLES: usize = 1000;
pub const REL_TOL: f64 = 1e-12;
const E: f64 = std::f64::consts::E;

/// `v` in catalog variable order, `c` in catalog constant order.
pub type ClosedForm = fn(&[f64], &[f64]) -> f64;

fn p(a: f64, b: f64) -> f64 {
    a.powf(b)
}

#[rustfmt::skip]
pub fn closed_forms() -> BTreeMap<(&'static str, &'static str), ClosedForm> {
    let table: Vec<(&str, &str, ClosedForm)> = vec![
        // m1, m2, r
        ("gravitation", "canonical", |v, c| c[0] * v[0] * v[1] / p(v[2], 2.0)),
        ("gravitation", "1/easy", |v, c| c[0] * v[0] * v[1] / p(v[2], 1.5)),
        ("gravitation", "1/medium", |v, c| c[0] * p(v[0] * v[1], 2.0) / p(v[2], 1.5)),
        ("gravitation", "1/hard", |v, c| c[0] * p(v[0] + v[1], 2.0) / p(v[2], 1.5)),
        ("gravitation", "2/easy", |v, c| c[0] * v[0] / p(v[2], 2.0)),
        ("gravitation", "2/medium", |v, c| c[0] * v[0] / p(v[2], 2.6)),
        ("gravitation", "2/hard", |v, c| c[0] * p(v[0], 1.3) / p(v[2], 2.6)),
        ("gravitation", "3/easy", |v, c| c[0] * p(v[0], 2.0) * p(v[1], 2.0) / p(v[2], 2.0)),
        ("gravitation", "3/medium", |v, c| c[0] * p(v[0], 2.0) * p(v[1], 2.0) * p(v[2], 2.0)),
        ("gravitation", "3/hard", |v, c| c[0] * (p(v[0], 2.0) + p(v[1], 2.0)) * p(v[2], 2.0)),
        // q1, q2, r
        ("electrostatics", "canonical", |v, c| c[0] * v[0] * v[1] / p(v[2], 2.0)),
        ("electrostatics", "1/easy", |v, c| c[0] * v[0] * v[1] / p(v[2], 3.0)),
        ("electrostatics", "1/medium", |v, c| c[0] * v[0] * v[1] * (v[0] + v[1]) / p(v[2], 2.0)),
        ("electrostatics", "1/hard", |v, c| c[0] * v[0] * v[1] * (v[0] + v[1]) / p(v[2], E)),
        ("electrostatics", "2/easy", |v, c| c[0] * p(v[0] * v[1], 3.0) / p(v[2], 2.0)),
        ("electrostatics", "2/medium", |v, c| c[0] * p(v[0] + v[1], 3.0) / p(v[2], 2.0)),
        ("electrostatics", "2/hard", |v, c| c[0] * p(v[0] + v[1], 3.0) * p(v[1], 2.0) / p(v[2], 2.0)),
        ("electrostatics", "3/easy", |v, c| c[0] * v[1] * p(v[0], 3.0) / p(v[2], 2.0)),
        ("electrostatics", "3/medium", |v, c| c[0] * p(v[0], 3.0) * p(v[1], 2.0) / p(v[2], 2.5)),
        ("electrostatics", "3/hard", |v, c| c[0] * p(v[0], 3.0) * p(v[1], 2.0) / p(v[2], E)),
        // I1, I2, r
        ("magnetostatics", "canonical", |v, c| c[0] * v[0] * v[1] / v[2]),
        ("magnetostatics", "1/easy", |v, c| c[0] * v[0] * v[1] / p(v[2], 3.0)),
        ("magnetostatics", "1/medium", |v, c| c[0] * p(v[0] * v[1], 1.5) / p(v[2], 3.0)),
        ("magnetostatics", "1/hard", |v, c| c[0] * p(v[0] + v[1], 1.5) / p(v[2], 3.0)),
        ("magnetostatics", "2/easy", |v, c| c[0] * p(v[0] * v[1], 2.0) / v[2]),
        ("magnetostatics", "2/medium", |v, c| c[0] * v[2] * p(v[0] * v[1], 2.0)),
        ("magnetostatics", "2/hard", |v, c| c[0] * v[2] * p(v[0] - v[1], 2.0)),
        ("magnetostatics", "3/easy", |v, c| c[0] * v[1] / v[2]),
        ("magnetostatics", "3/medium", |v, c| c[0] * v[1] / p(v[2], 3.8)),
        ("magnetostatics", "3/hard", |v, c| c[0] * p(v[1], 0.9) / p(v[2], 3.8)),
        // A, dT, d
        ("thermal-conduction", "canonical", |v, c| c[0] * v[0] * v[1] / v[2]),
        ("thermal-conduction", "1/easy", |v, c| c[0] * v[0] * v[1] / p(v[2], 2.0)),
        ("thermal-conduction", "1/medium", |v, c| c[0] * (v[0] + v[1]) / p(v[2], 2.0)),
        ("thermal-conduction", "1/hard", |v, c| c[0] * v[1] * (v[0] + v[1]) * p(v[0], 2.0) / p(v[2], 2.0)),
        ("thermal-conduction", "2/easy", |v, c| c[0] * v[0] * v[1] / p(v[2], 3.0)),
        ("thermal-conduction", "2/medium", |v, c| c[0] * (v[0] + v[1]) / p(v[2], 3.0)),
        ("thermal-conduction", "2/hard", |v, c| c[0] * p(v[0] + v[1], 2.5) / p(v[2], E)),
        ("thermal-conduction", "3/easy", |v, c| c[0] * v[0] * p(v[1], 2.0) / v[2]),
        ("thermal-conduction", "3/medium", |v, c| c[0] * p(v[0] + v[1], 2.0) / v[2]),
        ("thermal-conduction", "3/hard", |v, c| (c[0] * v[0] + p(v[1], 2.0)) / p(v[2], E)),
        // n1, n2, theta1
        ("geometrical-optics", "canonical", |v, c| (c[0] * v[0] * v[2].sin() / v[1]).asin()),
        ("geometrical-optics", "1/easy", |v, c| (c[0] * v[0] * v[2].sin() / v[1]).acos()),
        ("geometrical-optics", "1/medium", |v, c| (c[0] * v[0] * v[2].cos() / v[1]).acos()),
        ("geometrical-optics", "1/hard", |v, c| (c[0] * v[2].cos() * p(v[0], 2.0) / v[1]).acos()),
        ("geometrical-optics", "2/easy", |v, c| (c[0] * v[1] * v[2].sin() / v[0]).asin()),
        ("geometrical-optics", "2/medium", |v, c| (c[0] * v[1] * v[2].sin() / v[0]).acos()),
        ("geometrical-optics", "2/hard", |v, c| (c[0] * v[1] * v[2].sin() / p(v[0], 2.5)).acos()),
        ("geometrical-optics", "3/easy", |v, c| (c[0] * v[0] * v[2].sin() / v[1]).atan()),
        ("geometrical-optics", "3/medium", |v, c| (c[0] * v[0] * v[2].tan() / v[1]).atan()),
        ("geometrical-optics", "3/hard", |v, c| (c[0] * p(v[0], 2.0) * v[2].tan() / p(v[1], 2.0)).atan()),
        // N0, t
        ("nuclear-physics", "canonical", |v, c| v[0] * (-c[0] * v[1]).exp()),
        ("nuclear-physics", "1/easy", |v, c| v[0] * (-c[0] * v[1].sqrt()).exp()),
        ("nuclear-physics", "1/medium", |v, c| v[0] * (-2.0 * c[0] + v[1].sqrt()).exp()),
        ("nuclear-physics", "1/hard", |v, c| v[0] * (-2.0 * c[0] + v[1].sqrt() - 2.0).exp()),
        ("nuclear-physics", "2/easy", |v, c| v[0] * (-c[0] * p(v[1], E)).exp()),
        ("nuclear-physics", "2/medium", |v, c| v[0] * (-c[0] + v[1].sqrt()).exp()),
        ("nuclear-physics", "2/hard", |v, c| v[0] * (3.0 - c[0] + v[1].sqrt()).exp()),
        ("nuclear-physics", "3/easy", |v, c| p(v[0], 1.5) * (-c[0] * v[1]).exp()),
        ("nuclear-physics", "3/medium", |v, c| p(v[0], 1.5) * (-c[0] + v[1].sqrt()).exp()),
        ("nuclear-physics", "3/hard", |v, c| (-c[0] + v[1].sqrt()).exp() * (1.5 * v[0].ln())),
        // m; C1, C2
        ("oscillations", "canonical", |v, c| (c[0] / v[0] - p(c[1] / (2.0 * v[0]), 2.0)).sqrt()),
        ("oscillations", "1/easy", |v, c| (c[0] / v[0] - c[1] / (2.0 * v[0])).sqrt()),
        ("oscillations", "1/medium", |v, c| (c[0] / v[0] - c[1] / (2.0 * v[0] * v[0])).sqrt()),
        ("oscillations", "1/hard", |v, c| p(c[0] / v[0] - c[1] / (2.0 * v[0] * v[0]), 1.5)),
        ("oscillations", "2/easy", |v, c| p(c[0] / v[0] - p(c[1] / (2.0 * v[0]), 2.0), 2.0)),
        ("oscillations", "2/medium", |v, c| p(c[0] / (v[0] * v[0]) - p(c[1] / (2.0 * v[0]), 2.0), 2.0)),
        ("oscillations", "2/hard", |v, c| p(c[0] * v[0] * v[0] - p(c[1] / (2.0 * v[0]), 2.0), 2.0)),
        ("oscillations", "3/easy", |v, c| c[0] / v[0] - p(c[1] / (2.0 * v[0]), 2.0)),
        ("oscillations", "3/medium", |v, c| c[0] / p(v[0], 1.3) - p(c[1] / (2.0 * v[0]), 2.0)),
        ("oscillations", "3/hard", |v, c| c[0] / p(v[0], 1.3) - p(c[1] / (2.0 * v[0]), 0.7)),
        // I0, theta
        ("physical-optics", "canonical", |v, c| c[0] * v[0] * p(v[1].cos(), 2.0)),
        ("physical-optics", "1/easy", |v, c| c[0] * v[0] * p(v[1].cos() + v[1].sin(), 2.0)),
        ("physical-optics", "1/medium", |v, c| c[0] * v[0] * p(2.0 * v[1].sin() + v[1].cos(), 2.0)),
        ("physical-optics", "1/hard", |v, c| c[0] * v[0] * p(1.5 * v[1].cos() + 2.0 * v[1].sin(), 2.0)),
        ("physical-optics", "2/easy", |v, c| c[0] * v[0] * p(v[1].tan(), 2.0)),
        ("physical-optics", "2/medium", |v, c| c[0] * v[0] * p(v[1].sin(), 2.0) / p(v[1].cos(), 3.0)),
        ("physical-optics", "2/hard", |v, c| c[0] * v[0] * p(p(v[1].sin(), 2.0) / p(v[1].cos(), 3.0), E)),
        ("physical-optics", "3/easy", |v, c| c[0] * v[0] / p(v[1].tan(), 2.0)),
        ("physical-optics", "3/medium", |v, c| c[0] * v[0] * p(v[1].cos() / v[1].sin(), E)),
        ("physical-optics", "3/hard", |v, c| c[0] * v[0] * p(p(v[1].sin(), 2.0) / v[1].cos(), E)),
        // gamma, T, M
        ("acoustics", "canonical", |v, c| (c[0] * v[1] * v[0] / v[2]).sqrt()),
        ("acoustics", "1/easy", |v, c| (c[0] * v[0] * v[1] * v[1] / v[2]).sqrt()),
        ("acoustics", "1/medium", |v, c| (c[0] * v[0] * v[1] * v[1] / p(v[2], 1.5)).sqrt()),
        ("acoustics", "1/hard", |v, c| (c[0] * v[1] * v[1] * v[0].exp() / p(v[2], 1.5)).sqrt()),
        ("acoustics", "2/easy", |v, c| c[0] * v[1] * v[0] / v[2]),
        ("acoustics", "2/medium", |v, c| v[1] * v[0] * (c[0] / v[2]).cbrt()),
        ("acoustics", "2/hard", |v, c| v[1] * (c[0] / v[2]).cbrt() * v[0].ln()),
        ("acoustics", "3/easy", |v, c| (c[0] * v[1] / v[2]).sqrt()),
        ("acoustics", "3/medium", |v, c| (c[0] * v[1] * p(v[2], 1.5)).sqrt()),
        ("acoustics", "3/hard", |v, c| 1.0 / p(c[0] * v[1] * p(v[2], 1.5), 2.8)),
        // x
        ("elasticity", "canonical", |v, c| c[0] * v[0]),
        ("elasticity", "1/easy", |v, c| 2.0 * c[0] * v[0] * v[0]),
        ("elasticity", "1/medium", |v, c| 2.0 * (c[0] + v[0] * v[0])),
        ("elasticity", "1/hard", |v, c| 2.0 * (c[0] + (v[0] * v[0]).sin())),
        ("elasticity", "2/easy", |v, c| 2.0 * v[0] * c[0] * c[0]),
        ("elasticity", "2/medium", |v, c| 2.0 * (c[0] * c[0] + p(v[0], 3.0))),
        ("elasticity", "2/hard", |v, c| 2.0 * ((c[0] * c[0]).sin() + p(v[0], 3.0))),
        ("elasticity", "3/easy", |v, c| 2.0 * p(c[0], 3.0) * v[0] * v[0]),
        ("elasticity", "3/medium", |v, c| 2.0 * (p(c[0], 3.0) + v[0] * v[0])),
        ("elasticity", "3/hard", |v, c| 2.0 * (p(c[0], 3.0).sin() + v[0] * v[0])),
        // omega, T
        ("statistical-mechanics", "canonical", |v, c| 1.0 / ((c[0] * v[0] / v[1]).exp() - 1.0)),
        ("statistical-mechanics", "1/easy", |v, c| 1.0 / (1.0 + (c[0] * v[0] / v[1]).exp())),
        ("statistical-mechanics", "1/medium", |v, c| 1.0 / (1.0 + (c[0] * p(v[0], 1.5) / v[1]).exp())),
        ("statistical-mechanics", "1/hard", |v, c| 1.0 / (1.0 + (c[0] * p(v[0], 1.5) / (v[1] * v[1])).exp())),
        ("statistical-mechanics", "2/easy", |v, c| 1.0 / ((c[0] * v[0].sqrt() / v[1]).exp() - 1.0)),
        ("statistical-mechanics", "2/medium", |v, c| 1.0 / ((c[0] * v[1] * v[0].sqrt()).exp() - 1.0)),
        ("statistical-mechanics", "2/hard", |v, c| 1.0 / ((c[0] * p(v[1], 2.3) * v[0].sqrt()).exp() - 1.0)),
        ("statistical-mechanics", "3/easy", |v, c| 1.0 / ((c[0] * v[0] / p(v[1], 3.0)).exp() - 1.0)),
        ("statistical-mechanics", "3/medium", |v, c| 1.0 / ((c[0] * p(v[0], 1.5) / p(v[1], 3.0)).exp() - 1.0)),
        ("statistical-mechanics", "3/hard", |v, c| 1.0 / (-(c[0] * p(v[0], 1.5) / p(v[1], 3.0)).ln() - 1.0)),
        // m, dT
        ("calorimetry", "canonical", |v, c| c[0] * v[1] * v[0]),
        ("calorimetry", "1/easy", |v, c| c[0] * v[0] * p(v[1], 2.5)),
        ("calorimetry", "1/medium", |v, c| v[0] * p(v[1], 2.5) / c[0].exp()),
        ("calorimetry", "1/hard", |v, c| (-c[0]).exp() * (v[0].ln() + 2.5 * v[1].ln())),
        ("calorimetry", "2/easy", |v, c| c[0] * v[1] * p(v[0], 2.5)),
        ("calorimetry", "2/medium", |v, c| c[0] * (v[1] * v[1]).exp() * p(v[0], 2.5)),
        ("calorimetry", "2/hard", |v, c| (-v[1] * v[1]).exp() * (c[0].ln() + 2.5 * v[0].ln())),
        ("calorimetry", "3/easy", |v, c| v[1] * v[0] * p(c[0], 2.5)),
        ("calorimetry", "3/medium", |v, c| p(c[0], 2.5) * (-v[1] * v[0]).exp()),
        ("calorimetry", "3/hard", |v, c| (v[0] - v[1]).exp() * 2.5 * c[0].ln()),
    ];
    table.into_iter().map(|(d, k, f)| ((d, k), f)).collect()
}

/// Relative error with an absolute floor at zero.
fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub struct Outcome {
    pub worst: f64,
    pub definedness_mismatches: usize,
}

fn check(expr: &Expr, f: ClosedForm, sampling: &[(String, Distribution)], seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let consts: Vec<f64> = expr.constants().iter().map(|c| c.default_value).collect();
    let mut out = Outcome {
        worst: 0.0,
        definedness_mismatches: 0,
    };
    for _ in 0..SAMPLES {
        let point: Vec<f64> = sampling.iter().map(|(_, d)| d.sample(&mut rng)).collect();
        let bindings: Vec<(String, f64)> = sampling
            .iter()
            .map(|(k, _)| k.clone())
            .zip(point.iter().copied())
            .collect();
        let got = expr.evaluate(&bindings).expect("every variable is bound").value();
        let want = f(&point, &consts);
        match (got, want.is_finite()) {
            (Some(g), true) => out.worst = out.worst.max(rel_err(g, want)),
            (None, false) => {}
            _ => out.definedness_mismatches += 1,
        }
    }
    out
}

type Sampling = Vec<(String, Distribution)>;

/// Every equation is evaluated at 1000 in-range samples per equation.
pub fn run_all() -> Vec<(String, Outcome)> {
    let forms = closed_forms();
    let mut results = Vec::new();
    let mut seed = 0u64;
    for law in &shipped_catalog().laws {
        let mut cases: Vec<(String, &Expr, Sampling)> =
            vec![("canonical".to_string(), &law.canonical, law.sampling(None))];
        for (chain, tl) in law.variants() {
            let key = format!("{}/{}", chain + 1, tl.tier.as_str());
            cases.push((key, &tl.expr, law.sampling(Some(&tl.domain))));
        }
        for (key, expr, sampling) in cases {
            let f = *forms
                .get(&(law.domain.as_str(), key.as_str()))
                .unwrap_or_else(|| panic!("no closed form for {}/{key}", law.domain));
            seed += 1;
            results.push((format!("{}/{key}", law.domain), check(expr, f, &sampling, seed)));
        }
    }
    results
}
