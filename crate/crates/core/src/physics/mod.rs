//! Deterministic sensing physics.
//!
//! Everything in here is a pure function of its inputs. Pulses are treated as
//! instantaneous rotations, so a sequence is fully described by the times at
//! which the filter function `w(t)` changes sign.

mod field;
mod params;
mod sensing;
mod sequence;

pub use field::{AcField, PhaseSchedule, Tone};
pub use params::SensorParams;
pub use sensing::{
    accumulated_phase, allowed_frequencies, cp_frequency_response, decoherence, field_per_phase,
    nearest_allowed_frequency, phase_integral, phase_per_field, signal, AllowedFrequency,
};
pub use sequence::{make_sequence, Channel, PulseSequence};

use std::f64::consts::PI;

/// Electron gyromagnetic ratio, rad s⁻¹ T⁻¹.
pub const GAMMA_E: f64 = 2.0 * PI * 27.99e9;
/// ¹³C nuclear gyromagnetic ratio, rad s⁻¹ T⁻¹.
pub const GAMMA_N: f64 = 2.0 * PI * 10.705e6;

/// Wrap an angle onto (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x.rem_euclid(two_pi);
    if y > PI {
        y -= two_pi;
    }
    if y <= -PI {
        y += two_pi;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-0.5) + 0.5).abs() < 1e-15);
        for i in -100..100 {
            let y = wrap_phase(i as f64 * 0.37);
            assert!(y > -PI && y <= PI);
        }
    }
}
