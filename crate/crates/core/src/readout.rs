//! Digitised spin readout.
//!
//! A "bit" is the thresholded outcome of `R` repetitions of one sequence.
//! Two generative models are provided: a direct bit with symmetric flip
//! probability `1 − f`, and a photon-count model that sums Poisson photon
//! numbers over the repetitions and thresholds the total.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, DiscreteCDF, Normal, Poisson as PoissonLaw};

use crate::error::{Error, Result};

/// Measurement outcome: `Plus` is |ms=0⟩, `Minus` is |ms=−1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bit {
    Plus,
    Minus,
}

impl Bit {
    pub fn sign(self) -> f64 {
        match self {
            Bit::Plus => 1.0,
            Bit::Minus => -1.0,
        }
    }
}

/// Poisson photon-count readout. Means are photons per repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonCountModel {
    bright_mean: f64,
    dark_mean: f64,
    reps: u32,
    threshold: u64,
}

impl PhotonCountModel {
    pub fn new(bright_mean: f64, dark_mean: f64, reps: u32, threshold: u64) -> Result<Self> {
        if !(dark_mean > 0.0 && dark_mean.is_finite()) {
            return Err(Error::config("dark_mean", "must be positive"));
        }
        if !(bright_mean > dark_mean && bright_mean.is_finite()) {
            return Err(Error::config("bright_mean", "must exceed dark_mean"));
        }
        if reps == 0 {
            return Err(Error::config("reps", "must be at least 1"));
        }
        let lo = reps as f64 * dark_mean;
        let hi = reps as f64 * bright_mean;
        if !((threshold as f64) >= lo && (threshold as f64) < hi) {
            return Err(Error::config(
                "threshold",
                format!("must lie in [{lo}, {hi}), got {threshold}"),
            ));
        }
        Ok(PhotonCountModel {
            bright_mean,
            dark_mean,
            reps,
            threshold,
        })
    }

    /// Photon rates for which `reps` repetitions give equal error rates
    /// `1 − fidelity` on both states, with optical contrast
    /// `1 − dark/bright` as close to `contrast` as integer thresholds allow.
    pub fn tuned(fidelity: f64, contrast: f64, reps: u32) -> Result<Self> {
        if !(fidelity > 0.5 && fidelity < 1.0) {
            return Err(Error::config("readout_fidelity", "must be in (0.5, 1)"));
        }
        if !(contrast > 0.0 && contrast < 1.0) {
            return Err(Error::config("contrast", "must be in (0, 1)"));
        }
        let z = Normal::standard().inverse_cdf(fidelity);
        // Normal approximation for the starting threshold.
        let root_bright = z * (1.0 + (1.0 - contrast).sqrt()) / contrast;
        let guess = (root_bright * root_bright * (1.0 - 0.5 * contrast)).round() as i64;
        let mut best: Option<(f64, u64, f64, f64)> = None;
        let span = (guess / 4).max(10);
        for t in (guess - span).max(0)..=guess + span {
            let t = t as u64;
            let bright = solve_rate(|lam| 1.0 - poisson_cdf(lam, t), fidelity, t);
            let dark = solve_rate(|lam| poisson_cdf(lam, t), fidelity, t);
            if !(bright > dark && dark > 0.0) {
                continue;
            }
            let err = ((1.0 - dark / bright) - contrast).abs();
            if best.is_none_or(|b| err < b.0) {
                best = Some((err, t, bright, dark));
            }
        }
        let (_, t, bright, dark) =
            best.ok_or_else(|| Error::Degenerate("no threshold reaches the target fidelity".into()))?;
        PhotonCountModel::new(bright / reps as f64, dark / reps as f64, reps, t)
    }

    pub fn bright_mean(&self) -> f64 {
        self.bright_mean
    }

    pub fn dark_mean(&self) -> f64 {
        self.dark_mean
    }

    pub fn reps(&self) -> u32 {
        self.reps
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    /// `P(+ | ms=0)`.
    pub fn p_correct_bright(&self) -> f64 {
        1.0 - poisson_cdf(self.reps as f64 * self.bright_mean, self.threshold)
    }

    /// `P(− | ms=−1)`.
    pub fn p_correct_dark(&self) -> f64 {
        poisson_cdf(self.reps as f64 * self.dark_mean, self.threshold)
    }

    /// Mean of the two state-conditional success probabilities, from the
    /// exact Poisson distribution.
    pub fn exact_fidelity(&self) -> f64 {
        0.5 * (self.p_correct_bright() + self.p_correct_dark())
    }

    fn draw_total<R: Rng + ?Sized>(&self, bright: bool, rng: &mut R) -> u64 {
        let mean = if bright { self.bright_mean } else { self.dark_mean };
        let lambda = mean * self.reps as f64;
        Poisson::new(lambda).expect("validated rate").sample(rng) as u64
    }
}

fn poisson_cdf(lambda: f64, k: u64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    PoissonLaw::new(lambda).expect("positive rate").cdf(k)
}

/// Bisection for the Poisson mean at which monotone `g(λ)` hits `target`.
fn solve_rate(g: impl Fn(f64) -> f64, target: f64, t: u64) -> f64 {
    let mut lo = 1e-9;
    let mut hi = 4.0 * (t as f64 + 10.0);
    let increasing = g(hi) > g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let above = g(mid) > target;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fidelity of discriminating two Poisson totals with means `reps·bright`
/// and `reps·dark` by `count > threshold`. Equal means give exactly 1/2.
pub fn poisson_fidelity(bright_mean: f64, dark_mean: f64, reps: u32, threshold: u64) -> f64 {
    let r = reps as f64;
    0.5 * (1.0 - poisson_cdf(r * bright_mean, threshold) + poisson_cdf(r * dark_mean, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeasurementModel {
    DirectBit { fidelity: f64 },
    PhotonCount(PhotonCountModel),
}

impl Default for MeasurementModel {
    fn default() -> Self {
        MeasurementModel::DirectBit { fidelity: 0.97 }
    }
}

impl MeasurementModel {
    pub fn direct(fidelity: f64) -> Result<Self> {
        if !(fidelity > 0.5 && fidelity <= 1.0) {
            return Err(Error::config(
                "readout_fidelity",
                format!("must be in (0.5, 1], got {fidelity}"),
            ));
        }
        Ok(MeasurementModel::DirectBit { fidelity })
    }

    /// Fidelity the estimator should assume for this model.
    pub fn fidelity(&self) -> f64 {
        match self {
            MeasurementModel::DirectBit { fidelity } => *fidelity,
            MeasurementModel::PhotonCount(m) => m.exact_fidelity(),
        }
    }
}

/// Draw one bit for a spin with signal `s = 2P(0) − 1`.
pub fn measure_bit<R: Rng + ?Sized>(s: f64, model: &MeasurementModel, rng: &mut R) -> Result<Bit> {
    if !(s.abs() <= 1.0) {
        return Err(Error::Domain(format!("signal must lie in [-1, 1], got {s}")));
    }
    let bright = rng.random::<f64>() < 0.5 * (1.0 + s);
    let bit = match model {
        MeasurementModel::DirectBit { fidelity } => {
            let flip = rng.random::<f64>() < 1.0 - fidelity;
            bright != flip
        }
        MeasurementModel::PhotonCount(m) => m.draw_total(bright, rng) > m.threshold,
    };
    Ok(if bit { Bit::Plus } else { Bit::Minus })
}

/// `P(+)` for signal `s` under symmetric readout fidelity `f`.
pub fn bit_probability(s: f64, fidelity: f64) -> f64 {
    fidelity * 0.5 * (1.0 + s) + (1.0 - fidelity) * 0.5 * (1.0 - s)
}

/// `P(u | φ)` for a bit taken after `n` cells with readout phase `Φ`,
/// coherence `d` and readout fidelity `f`. At `f = 1` this is `(±S + 1)/2`.
pub fn likelihood(u: Bit, phi: f64, n: u32, readout_phase: f64, d: f64, fidelity: f64) -> f64 {
    let s = d * (n as f64 * phi - readout_phase).cos();
    let p_plus = bit_probability(s, fidelity);
    match u {
        Bit::Plus => p_plus,
        Bit::Minus => 1.0 - p_plus,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityCalibration {
    pub monte_carlo: f64,
    pub normal_approx: f64,
    pub exact: f64,
    pub trials: usize,
}

/// Estimate how well the photon-count model separates the two spin states.
pub fn calibrate_fidelity<R: Rng + ?Sized>(
    model: &PhotonCountModel,
    trials: usize,
    rng: &mut R,
) -> Result<FidelityCalibration> {
    if model.bright_mean == model.dark_mean {
        return Err(Error::Degenerate("bright and dark photon means coincide".into()));
    }
    if trials < 10_000 {
        return Err(Error::TooFewSamples {
            needed: 10_000,
            got: trials,
        });
    }
    let mut correct = 0usize;
    for _ in 0..trials {
        if model.draw_total(true, rng) > model.threshold {
            correct += 1;
        }
        if model.draw_total(false, rng) <= model.threshold {
            correct += 1;
        }
    }
    let monte_carlo = correct as f64 / (2 * trials) as f64;

    let std_normal = Normal::standard();
    let r = model.reps as f64;
    let t = model.threshold as f64 + 0.5;
    let (lb, ld) = (r * model.bright_mean, r * model.dark_mean);
    let normal_approx =
        0.5 * (1.0 - std_normal.cdf((t - lb) / lb.sqrt()) + std_normal.cdf((t - ld) / ld.sqrt()));

    Ok(FidelityCalibration {
        monte_carlo,
        normal_approx,
        exact: model.exact_fidelity(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;
    use std::f64::consts::PI;

    fn frequency(s: f64, model: &MeasurementModel, draws: usize, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let plus = (0..draws)
            .filter(|_| measure_bit(s, model, &mut rng).unwrap() == Bit::Plus)
            .count();
        plus as f64 / draws as f64
    }

    fn within_3_sigma(p_hat: f64, p: f64, n: usize) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        (p_hat - p).abs() <= 3.0 * sigma.max(1.0 / n as f64)
    }

    #[test]
    fn perfect_readout_of_pure_state() {
        let m = MeasurementModel::direct(1.0).unwrap();
        assert_eq!(frequency(1.0, &m, 10_000, 1), 1.0);
        assert_eq!(frequency(-1.0, &m, 10_000, 1), 0.0);
    }

    #[test]
    fn out_of_range_signal() {
        let m = MeasurementModel::default();
        let mut rng = rng_from_seed(0);
        assert!(matches!(measure_bit(1.0 + 1e-9, &m, &mut rng), Err(Error::Domain(_))));
        assert!(measure_bit(f64::NAN, &m, &mut rng).is_err());
    }

    #[test]
    fn fidelity_validation() {
        assert!(MeasurementModel::direct(0.5).is_err());
        assert!(MeasurementModel::direct(1.2).is_err());
    }

    #[test]
    fn empirical_matches_likelihood() {
        let n = 100_000;
        for (i, &f) in [0.97, 0.9, 0.75].iter().enumerate() {
            let m = MeasurementModel::direct(f).unwrap();
            for (j, &s) in [-1.0, -0.4, 0.0, 0.3, 1.0].iter().enumerate() {
                let p_hat = frequency(s, &m, n, (i * 10 + j) as u64);
                let p = bit_probability(s, f);
                assert!(within_3_sigma(p_hat, p, n), "f={f} s={s}: {p_hat} vs {p}");
            }
        }
        // S = 0 is exactly 1/2 for any fidelity
        assert_eq!(bit_probability(0.0, 0.8), 0.5);
    }

    #[test]
    fn likelihood_edge_cases() {
        assert_eq!(likelihood(Bit::Plus, 0.0, 1, 0.0, 1.0, 1.0), 1.0);
        assert_eq!(likelihood(Bit::Minus, 0.0, 1, 0.0, 1.0, 1.0), 0.0);
        for i in 0..50 {
            let phi = -PI + i as f64 * 0.13;
            let a = likelihood(Bit::Plus, phi, 3, 0.4, 0.7, 0.93);
            let b = likelihood(Bit::Minus, phi, 3, 0.4, 0.7, 0.93);
            assert!((a + b - 1.0).abs() < 1e-15);
            // period 2π/n
            let c = likelihood(Bit::Plus, phi + 2.0 * PI / 3.0, 3, 0.4, 0.7, 0.93);
            assert!((a - c).abs() < 1e-12);
            // reflection
            let d = likelihood(Bit::Plus, -phi, 3, -0.4, 0.7, 0.93);
            assert!((a - d).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_means_are_indistinguishable() {
        assert_eq!(poisson_fidelity(0.01, 0.01, 15_000, 150), 0.5);
        assert!(PhotonCountModel::new(0.01, 0.01, 15_000, 150).is_err());
    }

    #[test]
    fn fidelity_grows_with_reps() {
        let mut last = 0.5;
        for reps in [1_000u32, 4_000, 15_000, 60_000] {
            // threshold at the midpoint of the two totals
            let t = (reps as f64 * 0.0085) as u64;
            let f = poisson_fidelity(0.01, 0.007, reps, t);
            assert!(f > last, "reps {reps}: {f} <= {last}");
            last = f;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn tuned_model_hits_target() {
        let m = PhotonCountModel::tuned(0.97, 0.3, 15_000).unwrap();
        assert!((m.p_correct_bright() - 0.97).abs() < 1e-9);
        assert!((m.p_correct_dark() - 0.97).abs() < 1e-9);
        let contrast = 1.0 - m.dark_mean() / m.bright_mean();
        assert!((contrast - 0.3).abs() < 0.01, "contrast {contrast}");

        let mut rng = rng_from_seed(11);
        let cal = calibrate_fidelity(&m, 20_000, &mut rng).unwrap();
        assert!((cal.exact - 0.97).abs() < 1e-9);
        assert!((cal.monte_carlo - 0.97).abs() < 0.005);
        assert!((cal.normal_approx - 0.97).abs() < 0.01);
        assert!(calibrate_fidelity(&m, 100, &mut rng).is_err());
    }
}
