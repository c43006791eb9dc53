//! Dual-channel (I/Q) reconstruction of field amplitude and classical phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pea::{
    measure_level_bit, plan_level, BitRecord, Estimator, LevelTally, PeaConfig, PeaRun,
};
use crate::physics::{field_per_phase, wrap_phase, AcField, Channel, SensorParams};
use crate::readout::MeasurementModel;
use crate::seeds::{rng_from_seed, TrialRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualMode {
    /// Full I routine, then full Q routine.
    Sequential,
    /// I and Q bits alternate within each level.
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockinResult {
    pub phi_i: f64,
    pub phi_q: f64,
    /// `None` when both quadrature phases are zero on the grid.
    pub theta_est: Option<f64>,
    pub phi_r: f64,
    /// Field amplitude estimate, tesla.
    pub b_mle: f64,
    pub seed: u64,
    /// Model time of the I and Q routines together, seconds.
    pub model_time: f64,
}

impl LockinResult {
    pub fn amplitude_null(&self) -> bool {
        self.theta_est.is_none()
    }
}

/// Combine quadrature phases into `(θ_est, φ_R, b)`.
///
/// `θ_est = atan2(−φ_Q, φ_I)` on (−π, π], `φ_R = √(φ_I² + φ_Q²)`,
/// `b = π φ_R / (2γe τ)`.
pub fn reconstruct(phi_i: f64, phi_q: f64, tau: f64, gamma_e: f64) -> (Option<f64>, f64, f64) {
    let phi_r = phi_i.hypot(phi_q);
    let theta = if phi_i == 0.0 && phi_q == 0.0 {
        None
    } else {
        Some(wrap_phase((-phi_q).atan2(phi_i)))
    };
    (theta, phi_r, phi_r * field_per_phase(tau, gamma_e))
}

#[derive(Debug, Clone)]
pub struct DualRun {
    pub result: LockinResult,
    pub i: PeaRun,
    pub q: PeaRun,
}

/// Paired I and Q estimators sharing one configuration.
#[derive(Debug, Clone)]
pub struct DualEstimator {
    i: Estimator,
    q: Estimator,
    mode: DualMode,
}

impl DualEstimator {
    pub fn new(
        config: &PeaConfig,
        params: &SensorParams,
        model: &MeasurementModel,
        mode: DualMode,
    ) -> Result<Self> {
        Ok(DualEstimator {
            i: Estimator::new(&config.with_channel(Channel::I), params, model)?,
            q: Estimator::new(&config.with_channel(Channel::Q), params, model)?,
            mode,
        })
    }

    pub fn config(&self) -> &PeaConfig {
        self.i.config()
    }

    /// Run both channels against `field` with the RNG seeded from `seed`.
    pub fn run(&self, field: &AcField, seed: u64) -> Result<DualRun> {
        let mut rng = rng_from_seed(seed);
        let (i, q) = match self.mode {
            DualMode::Sequential => (self.i.run(field, &mut rng)?, self.q.run(field, &mut rng)?),
            DualMode::Interleaved => self.interleaved(field, &mut rng)?,
        };
        let tau = self.config().tau;
        let params = self.i.params();
        let (theta_est, phi_r, b_mle) = reconstruct(i.phi_mle(), q.phi_mle(), tau, params.gamma_e);
        let model_time = (i.cell_slots + q.cell_slots) as f64 * (tau + params.t_m);
        Ok(DualRun {
            result: LockinResult {
                phi_i: i.phi_mle(),
                phi_q: q.phi_mle(),
                theta_est,
                phi_r,
                b_mle,
                seed,
                model_time,
            },
            i,
            q,
        })
    }

    fn interleaved(&self, field: &AcField, rng: &mut TrialRng) -> Result<(PeaRun, PeaRun)> {
        let estimators = [&self.i, &self.q];
        let config = self.config();
        let params = self.i.params();
        let model = self.i.model();
        let mut log_weights = [self.i.empty_log_weights(), self.q.empty_log_weights()];
        let mut bits: [Vec<BitRecord>; 2] = [Vec::new(), Vec::new()];
        let mut slots = [0u64; 2];
        for k in config.level_sequence() {
            let plans = [
                plan_level(field, config, Channel::I, params, k)?,
                plan_level(field, config, Channel::Q, params, k)?,
            ];
            let mut tallies = [
                LevelTally::new(config.readout_phases.len()),
                LevelTally::new(config.readout_phases.len()),
            ];
            for rep in 0..plans[0].bits {
                for c in 0..2 {
                    let channel = [Channel::I, Channel::Q][c];
                    let (record, s) = measure_level_bit(
                        &plans[c],
                        rep,
                        channel,
                        config,
                        params,
                        model,
                        &mut tallies[c],
                        rng,
                    )?;
                    bits[c].push(record);
                    slots[c] += s;
                }
            }
            for c in 0..2 {
                estimators[c].accumulate(k, &tallies[c], &mut log_weights[c]);
            }
        }
        let [lwi, lwq] = log_weights;
        let [bi, bq] = bits;
        Ok((self.i.finish(lwi, bi, slots[0]), self.q.finish(lwq, bq, slots[1])))
    }
}

/// Run the I and Q estimators on one field and reconstruct amplitude and
/// phase. The RNG is seeded from `seed`.
pub fn run_dual(
    field: &AcField,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    mode: DualMode,
    seed: u64,
) -> Result<DualRun> {
    DualEstimator::new(config, params, model, mode)?.run(field, seed)
}

/// Sample standard error of the phase estimator about the true phase,
/// `√(Σ (θ_est,i − θ)² / (N(N−1)))`, with differences wrapped to (−π, π].
pub fn phase_resolution(results: &[LockinResult], theta_true: f64) -> Result<f64> {
    let n = results.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut sum = 0.0;
    for r in results {
        let est = r
            .theta_est
            .ok_or_else(|| Error::Degenerate("amplitude-null result has no phase".into()))?;
        sum += wrap_phase(est - theta_true).powi(2);
    }
    Ok((sum / (n * (n - 1)) as f64).sqrt())
}
