//! Non-adaptive Bayesian phase estimation.
//!
//! Level `k = 1..=K` runs the pulse train with `n = 2^(k−1)` cells, so the bit
//! statistics depend on `nφ`. Short sequences resolve the `2π/n` ambiguity of
//! long ones; the weighting `M(K,k) = M_K + F(K−k)` spends more bits on the
//! short, coarse levels. Readout phases are cycled round-robin over the bits
//! of a level. The posterior over the per-cell phase φ is accumulated in log
//! space on a uniform grid over (−π, π].

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{
    accumulated_phase, decoherence, make_sequence, AcField, Channel, SensorParams,
};
use crate::readout::{bit_probability, measure_bit, Bit, MeasurementModel};

/// Repetitions of level `k` out of `K`.
pub fn weight(levels: u32, k: u32, m_k: u32, f: u32) -> Result<u32> {
    if k < 1 || k > levels {
        return Err(Error::config("k", format!("must be in 1..={levels}, got {k}")));
    }
    Ok(m_k + f * (levels - k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelOrder {
    /// Longest sequence first (k = K..1).
    Descending,
    Ascending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeaConfig {
    /// Number of levels K.
    pub levels: u32,
    pub m_k: u32,
    pub f: u32,
    pub readout_phases: Vec<f64>,
    pub grid_size: usize,
    pub channel: Channel,
    /// Reference period, seconds.
    pub tau: f64,
    pub order: LevelOrder,
}

impl PeaConfig {
    /// K = 5, M_K = F = 4, readout phases {0, π/2}, 4096 grid points.
    pub fn new(tau: f64, channel: Channel) -> Self {
        PeaConfig {
            levels: 5,
            m_k: 4,
            f: 4,
            readout_phases: vec![0.0, PI / 2.0],
            grid_size: 4096,
            channel,
            tau,
            order: LevelOrder::Descending,
        }
    }

    pub fn with_channel(&self, channel: Channel) -> Self {
        PeaConfig {
            channel,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 || self.levels > 24 {
            return Err(Error::config("levels", format!("must be in 1..=24, got {}", self.levels)));
        }
        if self.m_k < 1 {
            return Err(Error::config("m_k", "must be at least 1"));
        }
        if self.readout_phases.is_empty() || self.readout_phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("readout_phases", "needs at least one finite phase"));
        }
        if self.grid_size < 2 {
            return Err(Error::config("grid_size", "must be at least 2"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config("tau", format!("must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// Levels in execution order.
    pub fn level_sequence(&self) -> Vec<u32> {
        match self.order {
            LevelOrder::Descending => (1..=self.levels).rev().collect(),
            LevelOrder::Ascending => (1..=self.levels).collect(),
        }
    }

    /// `Σ_k M(K,k) 2^(k−1)`: reference cells per repetition summed over all
    /// bits of one run.
    pub fn cell_count(&self) -> u64 {
        (1..=self.levels)
            .map(|k| (self.m_k + self.f * (self.levels - k)) as u64 * (1u64 << (k - 1)))
            .sum()
    }

    pub fn bits_per_run(&self) -> u64 {
        (1..=self.levels)
            .map(|k| (self.m_k + self.f * (self.levels - k)) as u64)
            .sum()
    }
}

/// Discretised posterior over the per-cell phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    phi_values: Vec<f64>,
    log_weights: Vec<f64>,
}

impl PosteriorGrid {
    /// Flat prior on `size` points `−π + (j+1)·2π/size`.
    pub fn uniform(size: usize) -> Self {
        let step = 2.0 * PI / size as f64;
        let phi_values = (0..size).map(|j| -PI + (j + 1) as f64 * step).collect();
        let mut g = PosteriorGrid {
            phi_values,
            log_weights: vec![0.0; size],
        };
        g.normalize();
        g
    }

    pub fn len(&self) -> usize {
        self.phi_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_values.is_empty()
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi_values
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Multiply in `P(u | φ)` for one bit.
    pub fn update(&mut self, u: Bit, n: u32, readout_phase: f64, d: f64, fidelity: f64) {
        let sign = u.sign();
        let nf = n as f64;
        for (lw, &phi) in self.log_weights.iter_mut().zip(&self.phi_values) {
            let s = d * (nf * phi - readout_phase).cos();
            let p = bit_probability(sign * s, fidelity);
            *lw += p.max(f64::MIN_POSITIVE).ln();
        }
    }

    /// Multiply in the likelihood of `plus` and `minus` counts taken with the
    /// same settings. Equivalent to as many single-bit updates.
    pub fn update_counts(
        &mut self,
        plus: u32,
        minus: u32,
        n: u32,
        readout_phase: f64,
        d: f64,
        fidelity: f64,
    ) {
        if plus == 0 && minus == 0 {
            return;
        }
        let nf = n as f64;
        let (cp, cm) = (plus as f64, minus as f64);
        for (lw, &phi) in self.log_weights.iter_mut().zip(&self.phi_values) {
            let s = d * (nf * phi - readout_phase).cos();
            let p = bit_probability(s, fidelity);
            if plus > 0 {
                *lw += cp * p.max(f64::MIN_POSITIVE).ln();
            }
            if minus > 0 {
                *lw += cm * (1.0 - p).max(f64::MIN_POSITIVE).ln();
            }
        }
    }

    /// Shift log weights so that `Σ exp(lw)·Δφ = 1`.
    pub fn normalize(&mut self) {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self.log_weights.iter().map(|lw| (lw - max).exp()).sum();
        let shift = max + sum.ln() + self.step().ln();
        for lw in &mut self.log_weights {
            *lw -= shift;
        }
    }

    /// Probability density at each grid point (normalised copy).
    pub fn density(&self) -> Vec<f64> {
        let mut g = self.clone();
        g.normalize();
        g.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    /// `Σ P·Δφ` of the current weights.
    pub fn total_mass(&self) -> f64 {
        let step = self.step();
        self.log_weights.iter().map(|lw| lw.exp() * step).sum()
    }
}

/// Grid maximum of a posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleEstimate {
    pub phi: f64,
    /// More than one grid point attains the maximum.
    pub degenerate: bool,
}

/// Argmax of the posterior, ties broken toward the smallest `|φ|`. A flat
/// posterior returns 0 with the degeneracy flag.
pub fn mle(posterior: &PosteriorGrid) -> MleEstimate {
    const TIE: f64 = 1e-12;
    let lw = posterior.log_weights();
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<f64> = None;
    let mut ties = 0usize;
    for (&w, &phi) in lw.iter().zip(posterior.phi_values()) {
        if w >= max - TIE {
            ties += 1;
            if best.is_none_or(|b| phi.abs() < b.abs()) {
                best = Some(phi);
            }
        }
    }
    let degenerate = ties > 1;
    let phi = if ties == posterior.len() { 0.0 } else { best.unwrap_or(0.0) };
    MleEstimate { phi, degenerate }
}

/// One recorded bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitRecord {
    pub channel: Channel,
    pub k: u32,
    pub n: u32,
    pub readout_phase: f64,
    pub repetition: u32,
    pub bit: Bit,
}

#[derive(Debug, Clone)]
pub struct PeaRun {
    pub estimate: MleEstimate,
    pub posterior: PosteriorGrid,
    pub bits: Vec<BitRecord>,
    /// Reference cells executed, each lasting `τ + t_M`, over all repetitions.
    pub cell_slots: u64,
}

impl PeaRun {
    pub fn phi_mle(&self) -> f64 {
        self.estimate.phi
    }

    pub fn model_time(&self, tau: f64, params: &SensorParams) -> f64 {
        self.cell_slots as f64 * (tau + params.t_m)
    }
}

/// Settings and noiseless phase of level `k` on one channel.
pub(crate) struct LevelPlan {
    pub k: u32,
    pub n: u32,
    pub bits: u32,
    pub d: f64,
    /// Noiseless total phase for each readout phase (same for all phases).
    pub total_phase: f64,
}

pub(crate) fn plan_level(
    field: &AcField,
    config: &PeaConfig,
    channel: Channel,
    params: &SensorParams,
    k: u32,
) -> Result<LevelPlan> {
    let n = 1u32 << (k - 1);
    let seq = make_sequence(config.tau, n, channel, 0.0)?;
    Ok(LevelPlan {
        k,
        n,
        bits: weight(config.levels, k, config.m_k, config.f)?,
        d: decoherence(n, config.tau, channel, params),
        total_phase: accumulated_phase(field, &seq, params),
    })
}

/// Per-level tallies of `+`/`−` outcomes for each readout phase.
pub(crate) struct LevelTally {
    plus: Vec<u32>,
    minus: Vec<u32>,
}

impl LevelTally {
    pub fn new(phases: usize) -> Self {
        LevelTally {
            plus: vec![0; phases],
            minus: vec![0; phases],
        }
    }
}

/// Draw bit `repetition` of a level. Readout phases cycle round-robin.
#[allow(clippy::too_many_arguments)]
pub(crate) fn measure_level_bit<R: Rng + ?Sized>(
    plan: &LevelPlan,
    repetition: u32,
    channel: Channel,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    tally: &mut LevelTally,
    rng: &mut R,
) -> Result<(BitRecord, u64)> {
    let idx = repetition as usize % config.readout_phases.len();
    let phase = config.readout_phases[idx];
    let s = plan.d * (plan.total_phase - phase).cos();
    let u = measure_bit(s, model, rng)?;
    match u {
        Bit::Plus => tally.plus[idx] += 1,
        Bit::Minus => tally.minus[idx] += 1,
    }
    let record = BitRecord {
        channel,
        k: plan.k,
        n: plan.n,
        readout_phase: phase,
        repetition,
        bit: u,
    };
    Ok((record, plan.n as u64 * params.reps as u64))
}

/// Precomputed log-likelihood tables for one configuration.
///
/// The tables depend only on the schedule, coherence and readout fidelity,
/// not on the field, so an ensemble of runs can share one estimator.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: PeaConfig,
    params: SensorParams,
    model: MeasurementModel,
    phi_values: Vec<f64>,
    /// `[level k−1][phase][±]` → ln P(u | φ) on the grid.
    tables: Vec<Vec<[Vec<f64>; 2]>>,
}

impl Estimator {
    pub fn new(config: &PeaConfig, params: &SensorParams, model: &MeasurementModel) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        let fidelity = model.fidelity();
        let phi_values = PosteriorGrid::uniform(config.grid_size).phi_values;
        let tables = (1..=config.levels)
            .map(|k| {
                let n = 1u32 << (k - 1);
                let d = decoherence(n, config.tau, config.channel, params);
                config
                    .readout_phases
                    .iter()
                    .map(|&phase| {
                        let mut plus = Vec::with_capacity(phi_values.len());
                        let mut minus = Vec::with_capacity(phi_values.len());
                        for &phi in &phi_values {
                            let p = bit_probability(d * (n as f64 * phi - phase).cos(), fidelity);
                            plus.push(p.max(f64::MIN_POSITIVE).ln());
                            minus.push((1.0 - p).max(f64::MIN_POSITIVE).ln());
                        }
                        [plus, minus]
                    })
                    .collect()
            })
            .collect();
        Ok(Estimator {
            config: config.clone(),
            params: params.clone(),
            model: *model,
            phi_values,
            tables,
        })
    }

    pub fn config(&self) -> &PeaConfig {
        &self.config
    }

    /// One run of the schedule against `field`.
    pub fn run<R: Rng + ?Sized>(&self, field: &AcField, rng: &mut R) -> Result<PeaRun> {
        let config = &self.config;
        let mut log_weights = vec![0.0; self.phi_values.len()];
        let mut bits = Vec::with_capacity(config.bits_per_run() as usize);
        let mut cell_slots = 0u64;
        for k in config.level_sequence() {
            let plan = plan_level(field, config, config.channel, &self.params, k)?;
            let mut tally = LevelTally::new(config.readout_phases.len());
            for rep in 0..plan.bits {
                let (record, slots) = measure_level_bit(
                    &plan,
                    rep,
                    config.channel,
                    config,
                    &self.params,
                    &self.model,
                    &mut tally,
                    rng,
                )?;
                bits.push(record);
                cell_slots += slots;
            }
            self.accumulate(k, &tally, &mut log_weights);
        }
        Ok(self.finish(log_weights, bits, cell_slots))
    }

    pub(crate) fn params(&self) -> &SensorParams {
        &self.params
    }

    pub(crate) fn model(&self) -> &MeasurementModel {
        &self.model
    }

    pub(crate) fn empty_log_weights(&self) -> Vec<f64> {
        vec![0.0; self.phi_values.len()]
    }

    /// Add the tallied bits of level `k` to `log_weights`.
    pub(crate) fn accumulate(&self, k: u32, tally: &LevelTally, log_weights: &mut [f64]) {
        for (i, table) in self.tables[(k - 1) as usize].iter().enumerate() {
            for (count, t) in [(tally.plus[i], &table[0]), (tally.minus[i], &table[1])] {
                if count > 0 {
                    let c = count as f64;
                    for (lw, l) in log_weights.iter_mut().zip(t) {
                        *lw += c * l;
                    }
                }
            }
        }
    }

    pub(crate) fn finish(&self, log_weights: Vec<f64>, bits: Vec<BitRecord>, cell_slots: u64) -> PeaRun {
        let mut posterior = PosteriorGrid {
            phi_values: self.phi_values.clone(),
            log_weights,
        };
        posterior.normalize();
        PeaRun {
            estimate: mle(&posterior),
            posterior,
            bits,
            cell_slots,
        }
    }
}

/// Run the weighted phase-estimation schedule on `config.channel`.
pub fn run_pea<R: Rng + ?Sized>(
    field: &AcField,
    config: &PeaConfig,
    params: &SensorParams,
    model: &MeasurementModel,
    rng: &mut R,
) -> Result<PeaRun> {
    Estimator::new(config, params, model)?.run(field, rng)
}

/// Rebuild a posterior from a bit log. Used to audit runs and to check that
/// the order of updates does not matter.
pub fn posterior_from_bits(
    bits: &[BitRecord],
    config: &PeaConfig,
    params: &SensorParams,
    fidelity: f64,
) -> PosteriorGrid {
    let mut posterior = PosteriorGrid::uniform(config.grid_size);
    for b in bits {
        let d = decoherence(b.n, config.tau, b.channel, params);
        posterior.update(b.bit, b.n, b.readout_phase, d, fidelity);
    }
    posterior.normalize();
    posterior
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;

    #[test]
    fn weights() {
        assert_eq!(weight(5, 5, 4, 4).unwrap(), 4);
        assert_eq!(weight(5, 1, 4, 4).unwrap(), 20);
        for k in 1..=6 {
            assert_eq!(weight(6, k, 7, 0).unwrap(), 7);
        }
        assert!(weight(5, 0, 4, 4).is_err());
        assert!(weight(5, 6, 4, 4).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = PosteriorGrid::uniform(4096);
        assert_eq!(g.len(), 4096);
        assert_eq!(*g.phi_values().last().unwrap(), PI);
        assert!(g.phi_values()[0] > -PI);
        assert!(g.phi_values().contains(&0.0));
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_posterior_is_degenerate_at_zero() {
        let e = mle(&PosteriorGrid::uniform(64));
        assert_eq!(e.phi, 0.0);
        assert!(e.degenerate);
    }

    #[test]
    fn delta_posterior() {
        let mut g = PosteriorGrid::uniform(256);
        let target = 37;
        for (j, lw) in g.log_weights.iter_mut().enumerate() {
            *lw = if j == target { 0.0 } else { -1e3 };
        }
        let e = mle(&g);
        assert_eq!(e.phi, g.phi_values()[target]);
        assert!(!e.degenerate);
    }

    #[test]
    fn symmetric_bimodal_is_flagged() {
        let mut g = PosteriorGrid::uniform(256);
        // readout phase 0 only: likelihood even in φ
        for _ in 0..30 {
            g.update(Bit::Plus, 1, 0.0, 1.0, 0.97);
            g.update(Bit::Minus, 2, 0.0, 1.0, 0.97);
        }
        g.normalize();
        let e = mle(&g);
        assert!(e.degenerate);
        assert!(e.phi != 0.0);
    }

    #[test]
    fn counts_equal_bits() {
        let mut a = PosteriorGrid::uniform(512);
        let mut b = PosteriorGrid::uniform(512);
        for _ in 0..3 {
            a.update(Bit::Plus, 4, 0.3, 0.8, 0.9);
        }
        a.update(Bit::Minus, 4, 0.3, 0.8, 0.9);
        b.update_counts(3, 1, 4, 0.3, 0.8, 0.9);
        a.normalize();
        b.normalize();
        for (x, y) in a.log_weights().iter().zip(b.log_weights()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_field_gives_zero_phase() {
        let mut params = SensorParams::default();
        params.t2 = 1.0;
        let model = MeasurementModel::direct(1.0).unwrap();
        // With a π/2 readout phase a zero field gives coin-flip bits, so the
        // exact-zero check uses the cosine readout alone.
        let mut cfg = PeaConfig::new(48e-6, Channel::I);
        cfg.readout_phases = vec![0.0];
        let step = 2.0 * PI / cfg.grid_size as f64;
        let hits = (0..200)
            .filter(|&i| {
                let mut rng = rng_from_seed(i);
                let run = run_pea(&AcField::zero(), &cfg, &params, &model, &mut rng).unwrap();
                run.phi_mle().abs() <= step
            })
            .count();
        assert!(hits >= 198, "{hits}/200");
    }

    #[test]
    fn zero_field_default_phases_is_centred() {
        let params = SensorParams::default();
        let model = MeasurementModel::default();
        let cfg = PeaConfig::new(48e-6, Channel::I);
        let phis: Vec<f64> = (0..200)
            .map(|i| {
                let mut rng = rng_from_seed(1000 + i);
                run_pea(&AcField::zero(), &cfg, &params, &model, &mut rng)
                    .unwrap()
                    .phi_mle()
            })
            .collect();
        let mean = phis.iter().sum::<f64>() / phis.len() as f64;
        let sd = (phis.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / 199.0).sqrt();
        assert!(mean.abs() < 3.0 * sd / (200f64).sqrt(), "mean {mean} sd {sd}");
        assert!(sd < 0.2);
    }

    #[test]
    fn run_accounts_cells_and_bits() {
        let params = SensorParams::default();
        let cfg = PeaConfig::new(48e-6, Channel::Q);
        let mut rng = rng_from_seed(3);
        let field = AcField::single(2e-7, 1.0 / 48e-6, 1.0).unwrap();
        let model = MeasurementModel::default();
        let run = run_pea(&field, &cfg, &params, &model, &mut rng).unwrap();
        assert_eq!(run.bits.len() as u64, cfg.bits_per_run());
        assert_eq!(run.cell_slots, cfg.cell_count() * params.reps as u64);
        assert!((run.posterior.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(run.bits[0].k, 5);
        let rebuilt = posterior_from_bits(&run.bits, &cfg, &params, model.fidelity());
        for (x, y) in run.posterior.log_weights().iter().zip(rebuilt.log_weights()) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
