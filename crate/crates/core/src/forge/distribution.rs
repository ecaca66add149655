use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-variable sampling law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    /// The logarithm is uniform on `[ln low, ln high]`.
    LogUniform {
        low: f64,
        high: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
}

impl Distribution {
    pub fn low(&self) -> f64 {
        match *self {
            Distribution::LogUniform { low, .. } | Distribution::Uniform { low, .. } => low,
        }
    }

    pub fn high(&self) -> f64 {
        match *self {
            Distribution::LogUniform { high, .. } | Distribution::Uniform { high, .. } => high,
        }
    }

    pub fn is_valid(&self) -> bool {
        let (lo, hi) = (self.low(), self.high());
        let ordered = lo.is_finite() && hi.is_finite() && lo < hi;
        match self {
            Distribution::LogUniform { .. } => ordered && lo > 0.0,
            Distribution::Uniform { .. } => ordered,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::LogUniform { low, high } => {
                let u: f64 = rng.random();
                let x = (low.ln() + u * (high.ln() - low.ln())).exp();
                x.clamp(low, high)
            }
            Distribution::Uniform { low, high } => {
                let u: f64 = rng.random();
                low + u * (high - low)
            }
        }
    }

    /// Representative interior value: geometric mean for log-uniform,
    /// midpoint for uniform.
    pub fn center(&self) -> f64 {
        match *self {
            Distribution::LogUniform { low, high } => (low * high).sqrt(),
            Distribution::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.low() && x <= self.high()
    }
}
