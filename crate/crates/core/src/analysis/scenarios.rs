use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::ensemble::wrapped_std;
use super::sensitivity::b_ac_max;
use super::timing::{fixed_length_schedule, time_constant};
use crate::error::{Error, Result};
use crate::lockin::{DualEstimator, DualMode, LockinResult};
use crate::pea::{Estimator, PeaConfig, PosteriorGrid};
use crate::physics::{field_per_phase, wrap_phase, AcField, Channel, SensorParams, Tone};
use crate::readout::MeasurementModel;
use crate::seeds::{derive_seed, rng_from_seed};

// Seed lanes reserved for scenario-level draws, away from per-point lanes.
const TRUTH_LANE: u64 = 1 << 40;

/// Field of amplitude `|b|` with phase `θ`, or `θ + π` for negative `b`.
fn signed_tone(b: f64, f: f64, theta: f64) -> Result<AcField> {
    AcField::single(b.abs(), f, if b < 0.0 { theta + PI } else { theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudePoint {
    /// Signed drive amplitude, tesla.
    pub b_ac: f64,
    pub theta: f64,
    pub trial: u32,
    pub seed: u64,
    pub phi_i: f64,
    /// I-channel field estimate `π φ_I / (2γe τ)`.
    pub b_mle: f64,
}

/// I-channel estimates for every (amplitude, θ) pair, `trials` each.
pub fn amplitude_sweep(
    amplitudes: &[f64],
    thetas: &[f64],
    trials: u32,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    seed: u64,
) -> Result<Vec<AmplitudePoint>> {
    let estimator = Estimator::new(&config.with_channel(Channel::I), params, model)?;
    let scale = field_per_phase(config.tau, params.gamma_e);
    let jobs: Vec<(usize, f64, f64, u32)> = thetas
        .iter()
        .flat_map(|&th| amplitudes.iter().map(move |&b| (b, th)))
        .enumerate()
        .flat_map(|(lane, (b, th))| (0..trials).map(move |t| (lane, b, th, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(lane, b, theta, trial)| {
            let field = signed_tone(b, 1.0 / config.tau, theta)?;
            let s = derive_seed(seed, lane as u64, trial as u64);
            let phi = estimator.run(&field, &mut rng_from_seed(s))?.phi_mle();
            Ok(AmplitudePoint {
                b_ac: b,
                theta,
                trial,
                seed: s,
                phi_i: phi,
                b_mle: phi * scale,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub b_ac: f64,
    pub theta: f64,
    pub trial: u32,
    pub result: LockinResult,
}

/// Dual-channel reconstructions over a grid of field phases.
#[allow(clippy::too_many_arguments)]
pub fn phase_sweep(
    b_ac: f64,
    thetas: &[f64],
    trials: u32,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    mode: DualMode,
    seed: u64,
) -> Result<Vec<PhasePoint>> {
    let dual = DualEstimator::new(config, params, model, mode)?;
    let jobs: Vec<(usize, f64, u32)> = thetas
        .iter()
        .enumerate()
        .flat_map(|(lane, &th)| (0..trials).map(move |t| (lane, th, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(lane, theta, trial)| {
            let field = AcField::single(b_ac, 1.0 / config.tau, theta)?;
            let run = dual.run(&field, derive_seed(seed, lane as u64, trial as u64))?;
            Ok(PhasePoint {
                b_ac,
                theta,
                trial,
                result: run.result,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceChannel {
    I,
    Q,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    /// Model time at the end of the step, seconds.
    pub time: f64,
    pub truth: f64,
    pub estimate: f64,
    /// Raw channel phase behind `estimate`.
    pub raw: f64,
    pub channel: TraceChannel,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    /// Model time of one step, seconds.
    pub step_time: f64,
    pub points: Vec<TracePoint>,
}

impl ScenarioTrace {
    /// Fraction of points whose estimate matches the truth to within `tol`
    /// after wrapping.
    pub fn fraction_within(&self, tol: f64) -> f64 {
        let hits = self
            .points
            .iter()
            .filter(|p| wrap_phase(p.estimate - p.truth).abs() <= tol)
            .count();
        hits as f64 / self.points.len().max(1) as f64
    }
}

/// Phase telegraph between 0 and π, flipping with `flip_probability` per
/// step. Each step is one I-channel run; the detected phase is 0 for
/// `φ_I ≥ 0` and π otherwise.
#[allow(clippy::too_many_arguments)]
pub fn telegraph_scenario(
    b_ac: f64,
    flip_probability: f64,
    n_steps: usize,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    seed: u64,
) -> Result<ScenarioTrace> {
    if !(0.0..=1.0).contains(&flip_probability) {
        return Err(Error::config("flip_probability", "must lie in [0, 1]"));
    }
    let cfg = config.with_channel(Channel::I);
    let estimator = Estimator::new(&cfg, params, model)?;
    let step_time = time_constant(&cfg, params);
    let mut truth_rng = rng_from_seed(derive_seed(seed, TRUTH_LANE, 0));
    let mut theta = 0.0;
    let mut points = Vec::with_capacity(n_steps);
    for step in 0..n_steps {
        if step > 0 && truth_rng.random::<f64>() < flip_probability {
            theta = if theta == 0.0 { PI } else { 0.0 };
        }
        let field = AcField::single(b_ac, 1.0 / cfg.tau, theta)?;
        let s = derive_seed(seed, 0, step as u64);
        let phi = estimator.run(&field, &mut rng_from_seed(s))?.phi_mle();
        points.push(TracePoint {
            step,
            time: (step + 1) as f64 * step_time,
            truth: theta,
            estimate: if phi >= 0.0 { 0.0 } else { PI },
            raw: phi,
            channel: TraceChannel::I,
            seed: s,
        });
    }
    Ok(ScenarioTrace { step_time, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhaseDistribution {
    /// Independent θ uniform on (−π, π] each step.
    Uniform,
    /// Random walk with normally distributed steps of this width, radians.
    RandomWalk { step_sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPhaseOutcome {
    pub trace: ScenarioTrace,
    /// Mean and smallest true `|Δθ|` among detected jumps, radians. A jump
    /// counts as detected when the estimated jump matches it to within half
    /// its size. Both are NaN when nothing was detected.
    pub mean_jump: f64,
    pub min_jump: f64,
    /// Fraction of step-to-step jumps detected.
    pub detected_fraction: f64,
}

/// Dual-channel tracking of a randomly varying field phase.
#[allow(clippy::too_many_arguments)]
pub fn random_phase_scenario(
    b_ac: f64,
    distribution: PhaseDistribution,
    n_steps: usize,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    mode: DualMode,
    seed: u64,
) -> Result<RandomPhaseOutcome> {
    let mut truth_rng = rng_from_seed(derive_seed(seed, TRUTH_LANE, 1));
    let mut thetas = Vec::with_capacity(n_steps);
    match distribution {
        PhaseDistribution::Uniform => {
            for _ in 0..n_steps {
                thetas.push(wrap_phase(PI * (2.0 * truth_rng.random::<f64>() - 1.0)));
            }
        }
        PhaseDistribution::RandomWalk { step_sd } => {
            let normal = Normal::new(0.0, step_sd)
                .map_err(|_| Error::config("step_sd", "must be finite and non-negative"))?;
            let mut theta = 0.0;
            for _ in 0..n_steps {
                thetas.push(theta);
                theta = wrap_phase(theta + normal.sample(&mut truth_rng));
            }
        }
    }
    let dual = DualEstimator::new(config, params, model, mode)?;
    let step_time = 2.0 * time_constant(config, params);
    let points: Vec<TracePoint> = thetas
        .par_iter()
        .enumerate()
        .map(|(step, &theta)| {
            let field = AcField::single(b_ac, 1.0 / config.tau, theta)?;
            let s = derive_seed(seed, 0, step as u64);
            let r = dual.run(&field, s)?.result;
            Ok(TracePoint {
                step,
                time: (step + 1) as f64 * step_time,
                truth: theta,
                estimate: r.theta_est.unwrap_or(0.0),
                raw: r.phi_r,
                channel: TraceChannel::Dual,
                seed: s,
            })
        })
        .collect::<Result<_>>()?;
    let jumps: Vec<f64> = points
        .windows(2)
        .filter_map(|w| {
            let truth = wrap_phase(w[1].truth - w[0].truth);
            let seen = wrap_phase(w[1].estimate - w[0].estimate);
            ((seen - truth).abs() < 0.5 * truth.abs()).then_some(truth.abs())
        })
        .collect();
    let (mean_jump, min_jump) = if jumps.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            jumps.iter().sum::<f64>() / jumps.len() as f64,
            jumps.iter().copied().fold(f64::INFINITY, f64::min),
        )
    };
    let detected_fraction = jumps.len() as f64 / points.len().saturating_sub(1).max(1) as f64;
    Ok(RandomPhaseOutcome {
        trace: ScenarioTrace { step_time, points },
        mean_jump,
        min_jump,
        detected_fraction,
    })
}

/// Pearson χ² p-value of `phases` against the uniform law on (−π, π].
pub fn uniformity_p_value(phases: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::config("bins", "need at least two bins"));
    }
    if phases.len() < 5 * bins {
        return Err(Error::TooFewSamples {
            needed: 5 * bins,
            got: phases.len(),
        });
    }
    let mut counts = vec![0usize; bins];
    for &p in phases {
        let x = (wrap_phase(p) + PI) / (2.0 * PI);
        let b = ((x * bins as f64).ceil() as usize).clamp(1, bins) - 1;
        counts[b] += 1;
    }
    let expected = phases.len() as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((bins - 1) as f64).expect("positive degrees of freedom");
    Ok(1.0 - dist.cdf(chi2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyShiftPoint {
    /// Detuning from the lock-in frequency, hertz.
    pub delta_f: f64,
    pub trial: u32,
    pub result: LockinResult,
}

/// Dual-channel readout of a tone detuned by `δf = r · f0` for each relative
/// shift `r`, with θ = 0 at the start of every sequence.
#[allow(clippy::too_many_arguments)]
pub fn frequency_shift_scenario(
    b_ac: f64,
    relative_shifts: &[f64],
    trials: u32,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    mode: DualMode,
    seed: u64,
) -> Result<Vec<FrequencyShiftPoint>> {
    let dual = DualEstimator::new(config, params, model, mode)?;
    let f0 = 1.0 / config.tau;
    let jobs: Vec<(usize, f64, u32)> = relative_shifts
        .iter()
        .enumerate()
        .flat_map(|(lane, &r)| (0..trials).map(move |t| (lane, r, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(lane, r, trial)| {
            let field = AcField::single(b_ac, f0 * (1.0 + r), 0.0)?;
            let run = dual.run(&field, derive_seed(seed, lane as u64, trial as u64))?;
            Ok(FrequencyShiftPoint {
                delta_f: r * f0,
                trial,
                result: run.result,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TwoToneOutcome {
    pub df0: f64,
    pub result: LockinResult,
    pub i_posterior: PosteriorGrid,
    pub q_posterior: PosteriorGrid,
}

/// Lock-in run on `b_ac [cos(2π f0 t) + cos(2π (f0 + df0) t)]`.
pub fn two_tone_scenario(
    b_ac: f64,
    df0: f64,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    seed: u64,
) -> Result<TwoToneOutcome> {
    let f0 = 1.0 / config.tau;
    let field = AcField::new(vec![
        Tone::new(b_ac, f0, 0.0)?,
        Tone::new(b_ac, f0 + df0, 0.0)?,
    ]);
    let dual = DualEstimator::new(config, params, model, DualMode::Sequential)?;
    let run = dual.run(&field, derive_seed(seed, 0, 0))?;
    Ok(TwoToneOutcome {
        df0,
        result: run.result,
        i_posterior: run.i.posterior,
        q_posterior: run.q.posterior,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeConstantPoint {
    pub levels: u32,
    pub f_ac: f64,
    pub tau: f64,
    pub time_constant: f64,
    pub sigma_phi: f64,
    /// Per-run minimum detectable field `π σφ / (2γe τ)`, tesla.
    pub delta_b: f64,
    /// `Δb √T_c`, T/√Hz.
    pub eta: f64,
}

/// Time constants and Monte Carlo Δb when the longest sequence is held at
/// `longest` and the lock-in frequency varies with the level count. The
/// field sits at `fraction` of each frequency's `b_max`.
#[allow(clippy::too_many_arguments)]
pub fn time_constant_sweep(
    longest: f64,
    max_levels: u32,
    base: &PeaConfig,
    fraction: f64,
    trials: usize,
    params: &SensorParams,
    model: &MeasurementModel,
    seed: u64,
) -> Result<Vec<TimeConstantPoint>> {
    fixed_length_schedule(longest, max_levels)
        .into_iter()
        .map(|(levels, f_ac)| {
            let mut cfg = base.with_channel(Channel::I);
            cfg.levels = levels;
            cfg.tau = 1.0 / f_ac;
            let estimator = Estimator::new(&cfg, params, model)?;
            let field = AcField::single(fraction * b_ac_max(cfg.tau, params), f_ac, 0.0)?;
            let phis = super::ensemble::phase_ensemble(&estimator, &field, trials, seed, levels as u64)?;
            let sigma_phi = wrapped_std(&phis);
            let t_c = time_constant(&cfg, params);
            let delta_b = sigma_phi * field_per_phase(cfg.tau, params.gamma_e);
            Ok(TimeConstantPoint {
                levels,
                f_ac,
                tau: cfg.tau,
                time_constant: t_c,
                sigma_phi,
                delta_b,
                eta: delta_b * t_c.sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 1.0 / 20.83e3;

    fn setup() -> (PeaConfig, SensorParams, MeasurementModel) {
        (
            PeaConfig::new(TAU, Channel::I),
            SensorParams::default(),
            MeasurementModel::default(),
        )
    }

    #[test]
    fn telegraph_without_flips_is_constant() {
        let (c, p, m) = setup();
        let t = telegraph_scenario(300e-9, 0.0, 12, &c, &p, &m, 5).unwrap();
        assert!(t.points.iter().all(|x| x.truth == 0.0));
        assert_eq!(t.fraction_within(1e-9), 1.0);
        assert!((t.points[11].time - 12.0 * t.step_time).abs() < 1e-9);
    }

    #[test]
    fn telegraph_without_signal_is_chance() {
        let (c, p, m) = setup();
        let t = telegraph_scenario(0.0, 0.5, 200, &c, &p, &m, 9).unwrap();
        let acc = t.fraction_within(1e-9);
        assert!((0.35..0.65).contains(&acc), "{acc}");
    }

    #[test]
    fn telegraph_is_seed_deterministic() {
        let (c, p, m) = setup();
        let a = telegraph_scenario(200e-9, 0.3, 10, &c, &p, &m, 77).unwrap();
        let b = telegraph_scenario(200e-9, 0.3, 10, &c, &p, &m, 77).unwrap();
        assert_eq!(a, b);
        assert!(telegraph_scenario(1e-9, 1.5, 3, &c, &p, &m, 1).is_err());
    }

    #[test]
    fn large_jumps_are_all_detected() {
        let (c, p, m) = setup();
        let out = random_phase_scenario(
            476e-9,
            PhaseDistribution::RandomWalk { step_sd: 0.8 },
            20,
            &c,
            &p,
            &m,
            DualMode::Sequential,
            3,
        )
        .unwrap();
        // every true jump is recovered in sign and size
        for w in out.trace.points.windows(2) {
            let truth = wrap_phase(w[1].truth - w[0].truth);
            let seen = wrap_phase(w[1].estimate - w[0].estimate);
            assert!((seen - truth).abs() < 0.2 * truth.abs().max(0.2), "{seen} vs {truth}");
        }
        assert_eq!(out.detected_fraction, 1.0);
        assert!(out.min_jump > 0.0 && out.mean_jump >= out.min_jump);
    }

    #[test]
    fn uniform_phases_are_recovered_uniformly() {
        let (c, p, m) = setup();
        let out =
            random_phase_scenario(476e-9, PhaseDistribution::Uniform, 200, &c, &p, &m, DualMode::Sequential, 21)
                .unwrap();
        let est: Vec<f64> = out.trace.points.iter().map(|x| x.estimate).collect();
        let truth: Vec<f64> = out.trace.points.iter().map(|x| x.truth).collect();
        assert!(uniformity_p_value(&truth, 20).unwrap() > 0.01);
        assert!(uniformity_p_value(&est, 20).unwrap() > 0.01);
    }

    #[test]
    fn chi_square_flags_nonuniform() {
        let even: Vec<f64> = (0..2000).map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / 2000.0).collect();
        assert!(uniformity_p_value(&even, 20).unwrap() > 0.99);
        let lumped: Vec<f64> = (0..2000).map(|i| 0.001 * i as f64).collect();
        assert!(uniformity_p_value(&lumped, 20).unwrap() < 1e-6);
        assert!(uniformity_p_value(&even[..50], 20).is_err());
    }

    #[test]
    fn on_resonance_shift_reads_zero_quadrature() {
        let (c, p, m) = setup();
        let pts = frequency_shift_scenario(173e-9, &[0.0], 10, &c, &p, &m, DualMode::Sequential, 4).unwrap();
        let q: Vec<f64> = pts.iter().map(|x| x.result.phi_q).collect();
        let mean = q.iter().sum::<f64>() / q.len() as f64;
        assert!(mean.abs() < 0.05, "{mean}");
    }

    #[test]
    fn two_tone_limits() {
        let (c, p, m) = setup();
        let b = 0.296 * b_ac_max(TAU, &p) / 2.0;
        let one = two_tone_scenario(b, 0.0, &c, &p, &m, 8).unwrap();
        let single_phi = b * crate::physics::phase_per_field(TAU, p.gamma_e);
        assert!((one.result.phi_i - 2.0 * single_phi).abs() < 0.05, "{}", one.result.phi_i);
        let zero = two_tone_scenario(0.0, 500.0, &c, &p, &m, 8).unwrap();
        assert!(zero.result.phi_i.abs() < 0.2 && zero.result.phi_q.abs() < 0.2);
    }

    #[test]
    fn time_constant_sweep_keeps_longest_sequence() {
        let (c, p, m) = setup();
        let pts = time_constant_sweep(256e-6, 4, &c, 0.3, 30, &p, &m, 1).unwrap();
        assert_eq!(pts.len(), 4);
        for x in &pts {
            let longest = (1u64 << (x.levels - 1)) as f64 * x.tau;
            assert!((longest - 256e-6).abs() < 1e-15);
            assert!(x.time_constant > 0.0 && x.delta_b > 0.0);
        }
    }
}
