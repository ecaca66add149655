use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::expr::{EvalResult, Undefined};

/// Noise levels a session may use.
pub const NOISE_LEVELS: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];

/// Multiplicative relative noise: `v * (1 + eps)`, `eps ~ N(0, sigma^2)`.
///
/// One standard-normal draw is consumed for every call, defined or not, so
/// the stream position depends only on how many scalars were reported.
pub fn apply_noise<R: Rng + ?Sized>(value: EvalResult, sigma: f64, rng: &mut R) -> EvalResult {
    let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
    match value {
        EvalResult::Value(v) if sigma > 0.0 => {
            let noisy = v * (1.0 + sigma * z);
            if noisy.is_finite() {
                EvalResult::Value(noisy)
            } else {
                EvalResult::Undefined(Undefined::Overflow)
            }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            apply_noise(EvalResult::Value(3.337e-5), 0.0, &mut rng),
            EvalResult::Value(3.337e-5)
        );
    }

    #[test]
    fn undefined_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = EvalResult::Undefined(Undefined::DomainError);
        for sigma in NOISE_LEVELS {
            assert_eq!(apply_noise(u, sigma, &mut rng), u);
        }
    }

    #[test]
    fn unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        for sigma in [1e-2, 1e-1] {
            let mean = (0..n)
                .map(|_| apply_noise(EvalResult::Value(7.0), sigma, &mut rng).value().unwrap() / 7.0 - 1.0)
                .sum::<f64>()
                / n as f64;
            assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "{sigma}: {mean}");
        }
    }
}
