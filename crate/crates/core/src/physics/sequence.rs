use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lock-in channel. `I` uses the CP-2n train (cosine quadrature), `Q` the
/// quarter-period shifted CP-(2n−1) train (sine quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    I,
    Q,
}

impl Channel {
    /// Number of π pulses for `n` reference cells.
    pub fn pulse_count(self, n: u32) -> u32 {
        match self {
            Channel::I => 2 * n,
            Channel::Q => 2 * n - 1,
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Channel::I => "I",
            Channel::Q => "Q",
        })
    }
}

/// A train of instantaneous π pulses between the two π/2 pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    tau: f64,
    n_cells: u32,
    channel: Channel,
    pulse_times: Vec<f64>,
    readout_phase: f64,
}

/// Build the pulse train for `n` cells of reference period `tau`.
///
/// I channel: π pulses at `τ/4` and `3τ/4` of every cell. Q channel: π pulses
/// at `jτ/2`, `j = 1..2n−1`.
pub fn make_sequence(tau: f64, n: u32, channel: Channel, readout_phase: f64) -> Result<PulseSequence> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::config("tau", format!("must be positive, got {tau}")));
    }
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    let pulse_times = match channel {
        Channel::I => (0..n)
            .flat_map(|c| {
                let start = c as f64 * tau;
                [start + 0.25 * tau, start + 0.75 * tau]
            })
            .collect(),
        Channel::Q => (1..2 * n).map(|j| j as f64 * 0.5 * tau).collect(),
    };
    Ok(PulseSequence {
        tau,
        n_cells: n,
        channel,
        pulse_times,
        readout_phase,
    })
}

impl PulseSequence {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_cells(&self) -> u32 {
        self.n_cells
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn pulse_times(&self) -> &[f64] {
        &self.pulse_times
    }

    pub fn pulse_count(&self) -> usize {
        self.pulse_times.len()
    }

    pub fn total_duration(&self) -> f64 {
        self.n_cells as f64 * self.tau
    }

    pub fn readout_phase(&self) -> f64 {
        self.readout_phase
    }

    /// Same pulse train, different readout phase.
    pub fn with_readout_phase(&self, phase: f64) -> Self {
        PulseSequence {
            readout_phase: phase,
            ..self.clone()
        }
    }

    pub fn reference_frequency(&self) -> f64 {
        1.0 / self.tau
    }

    pub fn reference_omega(&self) -> f64 {
        2.0 * PI / self.tau
    }

    /// Filter function `w(t) = (−1)^(pulses before t)`.
    pub fn filter(&self, t: f64) -> f64 {
        let before = self.pulse_times.partition_point(|&p| p < t);
        if before % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn us(x: f64) -> f64 {
        x * 1e-6
    }

    fn assert_times(seq: &PulseSequence, expected_us: &[f64]) {
        assert_eq!(seq.pulse_count(), expected_us.len());
        for (a, e) in seq.pulse_times().iter().zip(expected_us) {
            assert!((a - us(*e)).abs() < 1e-15, "{a} vs {e} us");
        }
    }

    #[test]
    fn single_i_cell() {
        let s = make_sequence(us(48.0), 1, Channel::I, 0.0).unwrap();
        assert_times(&s, &[12.0, 36.0]);
        assert!((s.total_duration() - us(48.0)).abs() < 1e-18);
    }

    #[test]
    fn two_q_cells() {
        let s = make_sequence(us(48.0), 2, Channel::Q, 0.0).unwrap();
        assert_times(&s, &[24.0, 48.0, 72.0]);
        assert!((s.total_duration() - us(96.0)).abs() < 1e-18);
    }

    #[test]
    fn cp16() {
        let s = make_sequence(us(48.0), 8, Channel::I, 0.0).unwrap();
        assert_eq!(s.pulse_count(), 16);
        assert!((s.total_duration() - us(384.0)).abs() < 1e-17);
    }

    #[test]
    fn invalid() {
        assert!(make_sequence(0.0, 1, Channel::I, 0.0).is_err());
        assert!(make_sequence(-1e-6, 1, Channel::I, 0.0).is_err());
        assert!(make_sequence(1e-6, 0, Channel::Q, 0.0).is_err());
    }

    #[test]
    fn grid_invariants() {
        for n in 1..20 {
            for ch in [Channel::I, Channel::Q] {
                let s = make_sequence(us(31.0), n, ch, 0.0).unwrap();
                assert_eq!(s.pulse_count() as u32, ch.pulse_count(n));
                let t = s.pulse_times();
                assert!(t.windows(2).all(|w| w[1] > w[0]));
                assert!(t[0] > 0.0 && *t.last().unwrap() < s.total_duration());
                assert_eq!(s.filter(0.0), 1.0);
            }
        }
    }

    #[test]
    fn filter_toggles() {
        let s = make_sequence(us(48.0), 1, Channel::I, 0.0).unwrap();
        assert_eq!(s.filter(us(5.0)), 1.0);
        assert_eq!(s.filter(us(20.0)), -1.0);
        assert_eq!(s.filter(us(40.0)), 1.0);
    }
}
