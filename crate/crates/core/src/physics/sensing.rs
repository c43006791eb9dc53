use std::f64::consts::PI;

use super::{AcField, Channel, PulseSequence, SensorParams, Tone};
use crate::error::{Error, Result};

/// `∫ b cos(ωt − θ) dt` over `[a, b]`, written as a product so short
/// intervals do not lose digits to cancellation.
fn cosine_integral(tone: &Tone, theta: f64, a: f64, b: f64) -> f64 {
    let w = tone.omega();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    tone.amplitude * 2.0 * (w * mid - theta).cos() * (w * half).sin() / w
}

/// `γe ∫₀ᵀ b_z(t) w(t) dt` exactly, with no channel sign convention applied.
///
/// The integral is split at every pulse and at every switch of the field's
/// phase schedule; on each piece the integrand is a plain cosine.
pub fn phase_integral(field: &AcField, seq: &PulseSequence, gamma_e: f64) -> f64 {
    let total = seq.total_duration();
    let mut events: Vec<(f64, bool)> = seq.pulse_times().iter().map(|&t| (t, true)).collect();
    if let Some(schedule) = field.phase_process() {
        events.extend(
            schedule
                .breakpoints()
                .filter(|&t| t > 0.0 && t < total)
                .map(|t| (t, false)),
        );
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    events.push((total, false));

    let mut acc = 0.0;
    let mut sign = 1.0;
    let mut start = 0.0;
    for (t, is_pulse) in events {
        if t > start {
            let mid = 0.5 * (start + t);
            let piece: f64 = field
                .tones()
                .iter()
                .map(|tone| cosine_integral(tone, field.theta_at(tone, mid), start, t))
                .sum();
            acc += sign * piece;
        }
        if is_pulse {
            sign = -sign;
        }
        start = t;
    }
    gamma_e * acc
}

/// Total quantum phase `nφ` picked up over the sequence.
///
/// The Q-channel integral is negated so that `φ_Q = 2γe b_Q τ/π` with
/// `b_Q = −b sin θ`; then `atan2(−φ_Q, φ_I)` returns θ.
pub fn accumulated_phase(field: &AcField, seq: &PulseSequence, params: &SensorParams) -> f64 {
    let raw = phase_integral(field, seq, params.gamma_e);
    match seq.channel() {
        Channel::I => raw,
        Channel::Q => -raw,
    }
}

/// Per-cell phase per tesla of matched in-phase field, `2γe τ/π`.
pub fn phase_per_field(tau: f64, gamma_e: f64) -> f64 {
    2.0 * gamma_e * tau / PI
}

/// Field that produces one radian of per-cell phase, `π/(2γe τ)`.
pub fn field_per_phase(tau: f64, gamma_e: f64) -> f64 {
    PI / (2.0 * gamma_e * tau)
}

/// Coherence envelope `exp(−(nτ / (T2 m^s))^α)` for the `m` pulses of the
/// given channel.
pub fn decoherence(n: u32, tau: f64, channel: Channel, params: &SensorParams) -> f64 {
    let m = channel.pulse_count(n.max(1)) as f64;
    let t2m = params.t2 * m.powf(params.s_exp);
    let t = n as f64 * tau;
    (-(t / t2m).powf(params.alpha_exp)).exp()
}

/// Fringe signal `S = 2P(0) − 1 = D cos(nφ − Φ)`.
pub fn signal(field: &AcField, seq: &PulseSequence, params: &SensorParams) -> f64 {
    let d = decoherence(seq.n_cells(), seq.tau(), seq.channel(), params);
    d * (accumulated_phase(field, seq, params) - seq.readout_phase()).cos()
}

/// Reference frequencies compatible with ¹³C Larmor revivals,
/// `f_p = γn B0 / (2π · 2p)` for `p = 1..=p_max`.
pub fn allowed_frequencies(params: &SensorParams, p_max: u32) -> Result<Vec<f64>> {
    if !(params.b0 > 0.0) {
        return Err(Error::config("b0", "bias field must be positive for Larmor revivals"));
    }
    let f_larmor = params.gamma_n * params.b0 / (2.0 * PI);
    Ok((1..=p_max).map(|p| f_larmor / (2.0 * p as f64)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllowedFrequency {
    pub p: u32,
    pub frequency: f64,
    /// `(f_target − f_p)/f_p`.
    pub relative_mismatch: f64,
}

/// The revival-compatible frequency closest to `target`.
pub fn nearest_allowed_frequency(params: &SensorParams, target: f64) -> Result<AllowedFrequency> {
    if !(params.b0 > 0.0) {
        return Err(Error::config("b0", "bias field must be positive for Larmor revivals"));
    }
    if !(target > 0.0) {
        return Err(Error::config("frequency", "must be positive"));
    }
    let f_larmor = params.gamma_n * params.b0 / (2.0 * PI);
    let p_real = f_larmor / (2.0 * target);
    let candidates = [p_real.floor().max(1.0) as u32, p_real.ceil().max(1.0) as u32];
    let best = candidates
        .into_iter()
        .map(|p| {
            let f = f_larmor / (2.0 * p as f64);
            AllowedFrequency {
                p,
                frequency: f,
                relative_mismatch: (target - f) / f,
            }
        })
        .min_by(|a, b| a.relative_mismatch.abs().total_cmp(&b.relative_mismatch.abs()))
        .expect("two candidates");
    Ok(best)
}

/// Signal of `seq` for an in-phase (θ = 0) tone of amplitude `b_ac` swept
/// over `f_grid`.
pub fn cp_frequency_response(
    seq: &PulseSequence,
    b_ac: f64,
    f_grid: &[f64],
    params: &SensorParams,
) -> Result<Vec<f64>> {
    f_grid
        .iter()
        .map(|&f| {
            let field = AcField::single(b_ac, f, 0.0)?;
            Ok(signal(&field, seq, params))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{make_sequence, GAMMA_E};

    fn us(x: f64) -> f64 {
        x * 1e-6
    }

    #[test]
    fn zero_field_has_no_phase() {
        let seq = make_sequence(us(48.0), 3, Channel::I, 0.0).unwrap();
        let p = SensorParams::default();
        assert_eq!(accumulated_phase(&AcField::zero(), &seq, &p), 0.0);
        let f = AcField::single(0.0, 2e4, 0.0).unwrap();
        assert_eq!(accumulated_phase(&f, &seq, &p), 0.0);
    }

    #[test]
    fn orthogonal_quadrature_vanishes() {
        let p = SensorParams::default();
        let tau = us(48.0);
        for n in [1, 2, 5, 16] {
            let seq = make_sequence(tau, n, Channel::I, 0.0).unwrap();
            let f = AcField::single(3e-7, 1.0 / tau, PI / 2.0).unwrap();
            let phase = accumulated_phase(&f, &seq, &p);
            let scale = phase_per_field(tau, GAMMA_E) * 3e-7 * n as f64;
            assert!(phase.abs() < 1e-13 * scale, "n={n}: {phase}");
        }
    }

    #[test]
    fn reference_working_point_value() {
        // 100 nT at 20.83 kHz, θ = 0, one I cell.
        let tau = us(48.008);
        let seq = make_sequence(tau, 1, Channel::I, 0.0).unwrap();
        let f = AcField::single(100e-9, 1.0 / tau, 0.0).unwrap();
        let phase = accumulated_phase(&f, &seq, &SensorParams::default());
        assert!((phase - 0.5375).abs() < 5e-4, "{phase}");
    }

    #[test]
    fn coincident_tones_double() {
        let tau = us(48.0);
        let p = SensorParams::default();
        let seq = make_sequence(tau, 4, Channel::I, 0.0).unwrap();
        let one = AcField::single(1e-7, 1.0 / tau, 0.0).unwrap();
        let tone = one.tones()[0];
        let two = AcField::new(vec![tone, tone]);
        let a = accumulated_phase(&one, &seq, &p);
        let b = accumulated_phase(&two, &seq, &p);
        assert!((b - 2.0 * a).abs() <= 1e-15 * a.abs());
    }

    #[test]
    fn decoherence_values() {
        let mut p = SensorParams::default();
        p.t2 = us(100.0);
        // 8 cells of 48 us on the I channel: 16 pulses, T2(16) = 400 us.
        let d = decoherence(8, us(48.0), Channel::I, &p);
        assert!((d - (-(0.96f64).powi(3)).exp()).abs() < 1e-15);
        assert!((d - 0.4128).abs() < 1e-4);

        // nτ = T2 m^s gives 1/e.
        let d = decoherence(2, us(100.0), Channel::I, &p);
        assert!((d - (-1.0f64).exp()).abs() < 1e-15);

        assert!((decoherence(1, 1e-12, Channel::Q, &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoherence_decreasing_in_tau() {
        let p = SensorParams::default();
        let mut last = 1.0;
        for i in 1..200 {
            let d = decoherence(4, us(i as f64), Channel::I, &p);
            assert!(d > 0.0 && d < last);
            last = d;
        }
    }

    #[test]
    fn signal_limits() {
        let mut p = SensorParams::default();
        p.t2 = 1e3; // effectively no decay
        let tau = us(48.0);
        let seq = make_sequence(tau, 1, Channel::I, 0.0).unwrap();
        assert!((signal(&AcField::zero(), &seq, &p) - 1.0).abs() < 1e-12);
        let seq90 = seq.with_readout_phase(PI / 2.0);
        assert!(signal(&AcField::zero(), &seq90, &p).abs() < 1e-12);
        // per-cell phase π
        let b = PI * field_per_phase(tau, p.gamma_e);
        let f = AcField::single(b, 1.0 / tau, 0.0).unwrap();
        assert!((signal(&f, &seq, &p) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cp16_fringe_period_is_eight_times_shorter() {
        let p = SensorParams::default();
        let tau = us(48.0);
        let cp2 = make_sequence(tau, 1, Channel::I, 0.0).unwrap();
        let cp16 = make_sequence(tau, 8, Channel::I, 0.0).unwrap();
        let b = 0.137e-6;
        let f2 = AcField::single(b, 1.0 / tau, 0.0).unwrap();
        let f16 = AcField::single(b / 8.0, 1.0 / tau, 0.0).unwrap();
        let a = accumulated_phase(&f2, &cp2, &p);
        let c = accumulated_phase(&f16, &cp16, &p);
        assert!((a - c).abs() < 1e-13);
    }

    #[test]
    fn larmor_frequencies() {
        let mut p = SensorParams::default();
        let f = allowed_frequencies(&p, 20).unwrap();
        assert_eq!(f.len(), 20);
        let f_l = p.gamma_n * p.b0 / (2.0 * PI);
        assert!((f_l - 503.135e3).abs() < 1.0);
        assert!((f[11] - 20.964e3).abs() < 1.0);
        let near = nearest_allowed_frequency(&p, 20.83e3).unwrap();
        assert_eq!(near.p, 12);
        assert!(near.relative_mismatch.abs() < 0.01);

        p.b0 *= 2.0;
        let g = allowed_frequencies(&p, 20).unwrap();
        for (a, b) in f.iter().zip(&g) {
            assert!((b - 2.0 * a).abs() < 1e-9 * b);
        }
        p.b0 = 0.0;
        assert!(allowed_frequencies(&p, 5).is_err());
    }

    #[test]
    fn dc_field_is_cancelled() {
        let p = SensorParams::default();
        let tau = us(48.0);
        let seq = make_sequence(tau, 4, Channel::I, 0.0).unwrap();
        let almost_dc = AcField::single(1e-6, 1e-3, 0.0).unwrap();
        let matched = AcField::single(1e-6, 1.0 / tau, 0.0).unwrap();
        let a = accumulated_phase(&almost_dc, &seq, &p);
        let b = accumulated_phase(&matched, &seq, &p);
        assert!(a.abs() < 1e-9 * b.abs());
    }

    #[test]
    fn response_peaks_at_reference() {
        let p = SensorParams::default();
        let tau = us(48.0);
        let seq = make_sequence(tau, 8, Channel::I, PI / 2.0).unwrap();
        let f0 = 1.0 / tau;
        let grid: Vec<f64> = (0..81).map(|i| f0 * (0.8 + 0.005 * i as f64)).collect();
        // small field: S ≈ D sin(nφ), so the response tracks the phase
        let s = cp_frequency_response(&seq, 2e-9, &grid, &p).unwrap();
        let imax = s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(imax, 40);
    }
}
