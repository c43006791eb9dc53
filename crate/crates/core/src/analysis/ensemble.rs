use rayon::prelude::*;

use crate::error::Result;
use crate::pea::Estimator;
use crate::physics::{wrap_phase, AcField};
use crate::seeds::{derive_seed, rng_from_seed};

/// `φ_MLE` of `trials` independent runs against `field`. Trial `i` uses seed
/// `derive_seed(master, lane, i)`; output order follows `i`.
pub fn phase_ensemble(
    estimator: &Estimator,
    field: &AcField,
    trials: usize,
    master: u64,
    lane: u64,
) -> Result<Vec<f64>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(master, lane, i));
            Ok(estimator.run(field, &mut rng)?.phi_mle())
        })
        .collect()
}

pub fn circular_mean(phases: &[f64]) -> f64 {
    let (s, c) = phases
        .iter()
        .fold((0.0, 0.0), |(s, c), p| (s + p.sin(), c + p.cos()));
    s.atan2(c)
}

/// Unbiased sample standard deviation.
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Standard deviation of phases after unwrapping them about their circular
/// mean.
pub fn wrapped_std(phases: &[f64]) -> f64 {
    let centre = circular_mean(phases);
    let dev: Vec<f64> = phases.iter().map(|p| wrap_phase(p - centre)).collect();
    sample_std(&dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrapped_spread_ignores_branch_cut() {
        let a = [PI - 0.01, -PI + 0.01, PI - 0.03, -PI + 0.03];
        let b = [-0.01, 0.01, -0.03, 0.03];
        assert!((wrapped_std(&a) - sample_std(&b)).abs() < 1e-12);
    }
}
