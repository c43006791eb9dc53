use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{phase_ensemble, wrapped_std};
use super::timing::time_constant;
use crate::error::{Error, Result};
use crate::pea::{Estimator, PeaConfig};
use crate::physics::{decoherence, field_per_phase, phase_per_field, AcField, Channel, SensorParams};
use crate::readout::MeasurementModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Carr–Purcell sequence with `2 * cells` pulses.
    Cp { cells: u32 },
    Pea,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Cp { cells } => write!(f, "CP-{}", 2 * cells),
            Method::Pea => write!(f, "PEA"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub method: Method,
    /// T/√Hz.
    pub eta: f64,
    /// Minimum detectable field at `integration_time`, tesla.
    pub delta_b: f64,
    pub b_max: f64,
    pub dr: f64,
    pub integration_time: f64,
}

/// Largest field the estimator maps without wrapping, `π ω0 / (4γe)` with
/// `ω0 = 2π/τ`.
pub fn b_ac_max(tau: f64, params: &SensorParams) -> f64 {
    PI * (2.0 * PI / tau) / (4.0 * params.gamma_e)
}

/// CP sensitivity of an `n`-cell in-phase sequence at field `b_ac`,
///
/// `η = π / (V √ξ · 2γe √(nτ) D(nτ) |cos(nφ_I)|)`.
///
/// Returns `f64::INFINITY` where the fringe slope vanishes.
pub fn cp_sensitivity(b_ac: f64, n: u32, tau: f64, params: &SensorParams) -> f64 {
    let phi = phase_per_field(tau, params.gamma_e) * b_ac;
    let slope = (n as f64 * phi).cos().abs();
    if slope == 0.0 {
        return f64::INFINITY;
    }
    let d = decoherence(n, tau, Channel::I, params);
    let t_seq = n as f64 * tau;
    PI / (params.visibility * params.collection_factor.sqrt() * 2.0 * params.gamma_e * t_seq.sqrt() * d * slope)
}

/// `η / √T`.
pub fn cp_delta_b(b_ac: f64, n: u32, tau: f64, params: &SensorParams, integration_time: f64) -> f64 {
    cp_sensitivity(b_ac, n, tau, params) / integration_time.sqrt()
}

/// CP baseline at its working point. The usable range is restricted to
/// `|nφ| < π/2`, i.e. `b_max / (2n)`.
pub fn cp_report(n: u32, tau: f64, params: &SensorParams, integration_time: f64) -> SensitivityReport {
    let eta = cp_sensitivity(0.0, n, tau, params);
    let delta_b = eta / integration_time.sqrt();
    let b_max = b_ac_max(tau, params) / (2 * n) as f64;
    SensitivityReport {
        method: Method::Cp { cells: n },
        eta,
        delta_b,
        b_max,
        dr: b_max / delta_b,
        integration_time,
    }
}

/// `Δb = π σφ / (2γe τ)` from an ensemble of PEA phase readouts.
pub fn pea_delta_b(phis: &[f64], tau: f64, params: &SensorParams) -> Result<f64> {
    const MIN: usize = 30;
    if phis.len() < MIN {
        return Err(Error::TooFewSamples {
            needed: MIN,
            got: phis.len(),
        });
    }
    Ok(wrapped_std(phis) * field_per_phase(tau, params.gamma_e))
}

/// PEA report from the per-run spread `sigma_phi`, rescaled from one time
/// constant to `integration_time` by `√(T_c / T)`.
pub fn pea_report(
    sigma_phi: f64,
    config: &PeaConfig,
    params: &SensorParams,
    integration_time: f64,
) -> SensitivityReport {
    let t_c = time_constant(config, params);
    let per_run = sigma_phi * field_per_phase(config.tau, params.gamma_e);
    let delta_b = per_run * (t_c / integration_time).sqrt();
    let b_max = b_ac_max(config.tau, params);
    SensitivityReport {
        method: Method::Pea,
        eta: per_run * t_c.sqrt(),
        delta_b,
        b_max,
        dr: b_max / delta_b,
        integration_time,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigScore {
    pub levels: u32,
    pub m_k: u32,
    pub f: u32,
    pub time_constant: f64,
    /// RMS over amplitudes of the per-amplitude phase spread.
    pub sigma_phi: f64,
    pub report: SensitivityReport,
}

/// Score every `(K, M_K, F)` in the grid by PEA dynamic range. Each score
/// pools `trials` runs at each fraction of `b_max` in `fractions`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_pea_configs(
    base: &PeaConfig,
    grid: &[(u32, u32, u32)],
    fractions: &[f64],
    trials: usize,
    params: &SensorParams,
    model: &MeasurementModel,
    integration_time: f64,
    seed: u64,
) -> Result<Vec<ConfigScore>> {
    let f0 = 1.0 / base.tau;
    let b_max = b_ac_max(base.tau, params);
    grid.iter()
        .map(|&(levels, m_k, f)| {
            let mut config = base.clone();
            config.levels = levels;
            config.m_k = m_k;
            config.f = f;
            let estimator = Estimator::new(&config, params, model)?;
            let mut sum_sq = 0.0;
            for (lane, frac) in fractions.iter().enumerate() {
                let field = AcField::single(frac.abs() * b_max, f0, if *frac < 0.0 { PI } else { 0.0 })?;
                let phis = phase_ensemble(&estimator, &field, trials, seed, lane as u64)?;
                sum_sq += wrapped_std(&phis).powi(2);
            }
            let sigma_phi = (sum_sq / fractions.len() as f64).sqrt();
            Ok(ConfigScore {
                levels,
                m_k,
                f,
                time_constant: time_constant(&config, params),
                sigma_phi,
                report: pea_report(sigma_phi, &config, params, integration_time),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub b_ac: f64,
    pub method: Method,
    pub delta_b: f64,
}

/// Δb versus field for the PEA (Monte Carlo, `trials` runs per amplitude)
/// and for CP sequences with the given cell counts (closed form).
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_sweep(
    amplitudes: &[f64],
    cp_cells: &[u32],
    config: &PeaConfig,
    trials: usize,
    params: &SensorParams,
    model: &MeasurementModel,
    integration_time: f64,
    seed: u64,
) -> Result<Vec<SensitivityPoint>> {
    let estimator = Estimator::new(config, params, model)?;
    let t_c = time_constant(config, params);
    let f0 = 1.0 / config.tau;
    let pea: Vec<f64> = amplitudes
        .par_iter()
        .enumerate()
        .map(|(lane, &b)| {
            let field = AcField::single(b.abs(), f0, if b < 0.0 { PI } else { 0.0 })?;
            let phis = phase_ensemble(&estimator, &field, trials, seed, lane as u64)?;
            Ok(pea_delta_b(&phis, config.tau, params)? * (t_c / integration_time).sqrt())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (&b, &db) in amplitudes.iter().zip(&pea) {
        out.push(SensitivityPoint {
            b_ac: b,
            method: Method::Pea,
            delta_b: db,
        });
        for &n in cp_cells {
            out.push(SensitivityPoint {
                b_ac: b,
                method: Method::Cp { cells: n },
                delta_b: cp_delta_b(b, n, config.tau, params, integration_time),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 1.0 / 20.83e3;

    #[test]
    fn b_max_at_lockin_frequency() {
        let p = SensorParams::default();
        let b = b_ac_max(TAU, &p);
        assert!((b - 584.5e-9).abs() < 0.5e-9, "{b}");
        assert!((b_ac_max(TAU / 2.0, &p) - 2.0 * b).abs() < 1e-20);
        assert!((0.296 * b - 173e-9).abs() < 0.5e-9);
    }

    #[test]
    fn working_point_is_minimum() {
        let p = SensorParams::default();
        let best = cp_sensitivity(0.0, 8, TAU, &p);
        let b_max = b_ac_max(TAU, &p);
        for i in 1..400 {
            let b = b_max * i as f64 / 400.0;
            assert!(cp_sensitivity(b, 8, TAU, &p) >= best);
        }
        // second working point at nφ = π
        let b_pi = b_max / 8.0;
        assert!((cp_sensitivity(b_pi, 8, TAU, &p) / best - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diverges_between_working_points() {
        let p = SensorParams::default();
        let b_half = b_ac_max(TAU, &p) / 16.0;
        let eta = cp_sensitivity(b_half, 8, TAU, &p);
        assert!(eta > 1e12 * cp_sensitivity(0.0, 8, TAU, &p) || eta.is_infinite());
    }

    #[test]
    fn sqrt_n_scaling_without_decoherence() {
        let mut p = SensorParams::default();
        p.t2 = 1e6;
        let e1 = cp_sensitivity(0.0, 1, TAU, &p);
        let e16 = cp_sensitivity(0.0, 16, TAU, &p);
        assert!((e1 / e16 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn report_invariants() {
        let p = SensorParams::default().with_matched_readout();
        let r = cp_report(8, TAU, &p, 150.0);
        assert!((r.dr - r.b_max / r.delta_b).abs() < 1e-12 * r.dr);
        assert_eq!(r.method.to_string(), "CP-16");
        let cfg = PeaConfig::new(TAU, Channel::I);
        let r = pea_report(0.01, &cfg, &p, 150.0);
        assert!(r.eta > 0.0 && r.delta_b > 0.0 && r.dr > 0.0);
        assert!((r.dr - r.b_max / r.delta_b).abs() < 1e-12 * r.dr);
    }

    #[test]
    fn small_ensemble_rejected() {
        let p = SensorParams::default();
        assert!(matches!(
            pea_delta_b(&[0.0; 29], TAU, &p),
            Err(Error::TooFewSamples { needed: 30, got: 29 })
        ));
    }

    #[test]
    fn spread_shrinks_with_budget_without_noise() {
        let mut p = SensorParams::default();
        p.t2 = 1e6;
        let model = MeasurementModel::direct(1.0).unwrap();
        let field = AcField::single(0.3 * b_ac_max(TAU, &p), 1.0 / TAU, 0.0).unwrap();
        let spread = |m_k: u32| {
            let mut cfg = PeaConfig::new(TAU, Channel::I);
            cfg.m_k = m_k;
            cfg.f = 0;
            let est = Estimator::new(&cfg, &p, &model).unwrap();
            let phis = phase_ensemble(&est, &field, 60, 3, 0).unwrap();
            pea_delta_b(&phis, TAU, &p).unwrap()
        };
        let floor = 2.0 * PI / 4096.0 * field_per_phase(TAU, p.gamma_e);
        let (coarse, fine) = (spread(2), spread(64));
        assert!(fine < coarse, "{fine} vs {coarse}");
        assert!(fine > 0.1 * floor);
    }
}
