use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Distribution;
use crate::expr::{Compiled, EvalError, Expr};

/// Ratio of the largest magnitude to the median one beyond which a law is
/// flagged as having near-pole outputs.
pub const POLE_RATIO: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPosedReport {
    pub samples: usize,
    pub defined_fraction: f64,
    /// Fraction of samples with a defined, non-negative output.
    pub nonneg_fraction: f64,
    pub positive_fraction: f64,
    /// Extrema over defined outputs; `None` when nothing was defined.
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub large_magnitude: bool,
}

impl WellPosedReport {
    pub fn is_well_posed(&self) -> bool {
        self.defined_fraction == 1.0 && self.nonneg_fraction == 1.0
    }
}

/// Samples `n` input points and summarizes the law's outputs.
pub fn check_well_posed(
    law: &Expr,
    sampling: &[(String, Distribution)],
    n: usize,
    rng_seed: u64,
) -> Result<WellPosedReport, EvalError> {
    let slots: Vec<String> = sampling.iter().map(|(v, _)| v.clone()).collect();
    let program = Compiled::new(law, &slots)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut inputs = vec![0.0; slots.len()];
    let mut stack = Vec::new();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        for (slot, (_, dist)) in inputs.iter_mut().zip(sampling) {
            *slot = dist.sample(&mut rng);
        }
        if let Some(v) = program.eval_with(&inputs, &mut stack).value() {
            values.push(v);
        }
    }
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let min = values.iter().copied().reduce(f64::min);
    let max = values.iter().copied().reduce(f64::max);
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let large_magnitude = match (mags.get(mags.len() / 2), mags.last()) {
        (Some(&median), Some(&top)) if median > 0.0 => top / median > POLE_RATIO,
        (Some(_), Some(&top)) => top > 0.0,
        _ => false,
    };
    Ok(WellPosedReport {
        samples: n,
        defined_fraction: frac(values.len()),
        nonneg_fraction: frac(values.iter().filter(|v| **v >= 0.0).count()),
        positive_fraction: frac(values.iter().filter(|v| **v > 0.0).count()),
        min,
        max,
        large_magnitude,
    })
}
