//! Plain-Rust back end of the browser demo. Everything here runs on one
//! thread.

use serde::Serialize;

use qlockin::analysis::b_ac_max;
use qlockin::lockin::{DualEstimator, DualMode};
use qlockin::pea::{PeaConfig, PosteriorGrid};
use qlockin::physics::{make_sequence, signal, AcField, Channel, SensorParams};
use qlockin::readout::MeasurementModel;
use qlockin::seeds::derive_seed;
use qlockin::{Error, Result};

pub const LOCKIN_HZ: f64 = 20.83e3;
/// Posterior points sent to the page.
const PLOT_POINTS: usize = 512;

fn tau() -> f64 {
    1.0 / LOCKIN_HZ
}

#[derive(Debug, Clone, Serialize)]
pub struct Fringe {
    pub amplitudes_nt: Vec<f64>,
    pub signal: Vec<f64>,
}

pub fn cp_fringe(pulses: u32, points: usize) -> Result<Fringe> {
    if pulses == 0 || pulses % 2 == 1 {
        return Err(Error::Domain(format!("pulse count must be even and positive, got {pulses}")));
    }
    if points < 2 {
        return Err(Error::Domain("need at least two points".into()));
    }
    let params = SensorParams::default();
    let seq = make_sequence(tau(), pulses / 2, Channel::I, 0.0)?;
    let b_max = b_ac_max(tau(), &params);
    let mut amplitudes_nt = Vec::with_capacity(points);
    let mut sig = Vec::with_capacity(points);
    for i in 0..points {
        let b = b_max * (-1.0 + 2.0 * i as f64 / (points - 1) as f64);
        let field = AcField::single(b.abs(), LOCKIN_HZ, if b < 0.0 { std::f64::consts::PI } else { 0.0 })?;
        amplitudes_nt.push(b * 1e9);
        sig.push(signal(&field, &seq, &params));
    }
    Ok(Fringe {
        amplitudes_nt,
        signal: sig,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LockinDemo {
    pub b_mle_nt: f64,
    pub theta_est_deg: Option<f64>,
    pub phi_i: f64,
    pub phi_q: f64,
    pub model_time_s: f64,
    pub phi: Vec<f64>,
    pub posterior_i: Vec<f64>,
    pub posterior_q: Vec<f64>,
}

/// Coarsen a density to `PLOT_POINTS` bins by keeping each bin's maximum,
/// so narrow peaks survive.
fn decimate(post: &PosteriorGrid) -> (Vec<f64>, Vec<f64>) {
    let d = post.density();
    let chunk = (d.len() / PLOT_POINTS).max(1);
    let phi = post.phi_values().chunks(chunk).map(|c| c[c.len() / 2]).collect();
    let peak = d.chunks(chunk).map(|c| c.iter().copied().fold(0.0, f64::max)).collect();
    (phi, peak)
}

pub fn lockin_run(amplitude_nt: f64, theta_deg: f64, seed: u64) -> Result<LockinDemo> {
    let params = SensorParams::default();
    let config = PeaConfig::new(tau(), Channel::I);
    let dual = DualEstimator::new(&config, &params, &MeasurementModel::default(), DualMode::Sequential)?;
    let field = AcField::single(amplitude_nt * 1e-9, LOCKIN_HZ, theta_deg.to_radians())?;
    let run = dual.run(&field, seed)?;
    let (phi, posterior_i) = decimate(&run.i.posterior);
    let (_, posterior_q) = decimate(&run.q.posterior);
    let r = run.result;
    Ok(LockinDemo {
        b_mle_nt: r.b_mle * 1e9,
        theta_est_deg: r.theta_est.map(f64::to_degrees),
        phi_i: r.phi_i,
        phi_q: r.phi_q,
        model_time_s: r.model_time,
        phi,
        posterior_i,
        posterior_q,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencyDemo {
    pub relative_shift: Vec<f64>,
    pub cp16_signal: Vec<f64>,
    pub mean_phi_q: Vec<f64>,
}

pub fn frequency_response(
    amplitude_nt: f64,
    span_percent: f64,
    points: usize,
    trials: u32,
    seed: u64,
) -> Result<FrequencyDemo> {
    if points < 2 || trials == 0 {
        return Err(Error::Domain("need at least two points and one trial".into()));
    }
    let params = SensorParams::default();
    let config = PeaConfig::new(tau(), Channel::I);
    let dual = DualEstimator::new(&config, &params, &MeasurementModel::default(), DualMode::Sequential)?;
    let cp16 = make_sequence(tau(), 8, Channel::I, 0.0)?;
    let b = amplitude_nt * 1e-9;
    let span = span_percent / 100.0;
    let mut out = FrequencyDemo {
        relative_shift: Vec::new(),
        cp16_signal: Vec::new(),
        mean_phi_q: Vec::new(),
    };
    for i in 0..points {
        let r = span * (-1.0 + 2.0 * i as f64 / (points - 1) as f64);
        let field = AcField::single(b, LOCKIN_HZ * (1.0 + r), 0.0)?;
        let mut sum = 0.0;
        for t in 0..trials {
            sum += dual.run(&field, derive_seed(seed, i as u64, t as u64))?.result.phi_q;
        }
        out.relative_shift.push(r);
        out.cp16_signal.push(signal(&field, &cp16, &params));
        out.mean_phi_q.push(sum / trials as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fringe_is_even_and_starts_bright() {
        let f = cp_fringe(16, 101).unwrap();
        assert_eq!(f.signal.len(), 101);
        assert!((f.signal[50] - f.signal.iter().cloned().fold(f64::MIN, f64::max)).abs() < 1e-12);
        for i in 0..50 {
            assert!((f.signal[i] - f.signal[100 - i]).abs() < 1e-12);
        }
        assert!(cp_fringe(3, 10).is_err());
    }

    #[test]
    fn lockin_demo_recovers_field() {
        let r = lockin_run(300.0, 40.0, 1).unwrap();
        assert!((r.b_mle_nt - 300.0).abs() < 15.0, "{}", r.b_mle_nt);
        assert!((r.theta_est_deg.unwrap() - 40.0).abs() < 5.0);
        assert_eq!(r.phi.len(), r.posterior_i.len());
        assert_eq!(r.phi.len(), 512);
    }

    #[test]
    fn frequency_demo_is_sign_resolving() {
        let r = frequency_response(173.0, 2.0, 3, 10, 2).unwrap();
        assert!(r.mean_phi_q[0] < 0.0 && r.mean_phi_q[2] > 0.0, "{:?}", r.mean_phi_q);
        assert!((r.cp16_signal[0] - r.cp16_signal[2]).abs() < 0.2);
    }
}
