use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::wrap_phase;
use crate::error::{Error, Result};

/// One cosine component `b cos(2π f t − θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Amplitude, tesla.
    pub amplitude: f64,
    /// Frequency, hertz.
    pub frequency: f64,
    /// Classical phase, radians on (−π, π].
    pub theta: f64,
}

impl Tone {
    pub fn new(amplitude: f64, frequency: f64, theta: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::config("amplitude", format!("must be ≥ 0, got {amplitude}")));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::config("frequency", format!("must be > 0, got {frequency}")));
        }
        if !theta.is_finite() {
            return Err(Error::config("theta", "must be finite"));
        }
        Ok(Tone {
            amplitude,
            frequency,
            theta: wrap_phase(theta),
        })
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }
}

/// Piecewise-constant override of the classical phase, in sequence-local
/// time. Entry `(t_i, θ_i)` holds on `[t_i, t_{i+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    steps: Vec<(f64, f64)>,
}

impl PhaseSchedule {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::config("phase_schedule", "needs at least one step"));
        }
        if steps[0].0 != 0.0 {
            return Err(Error::config("phase_schedule", "first step must start at t = 0"));
        }
        if steps.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::config("phase_schedule", "step times must be strictly increasing"));
        }
        Ok(PhaseSchedule {
            steps: steps.into_iter().map(|(t, th)| (t, wrap_phase(th))).collect(),
        })
    }

    pub fn theta_at(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|&(start, _)| start <= t);
        self.steps[idx.saturating_sub(1)].1
    }

    /// Switching times strictly after zero.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().skip(1).map(|&(t, _)| t)
    }
}

/// The magnetic field being sensed: a sum of tones, optionally with a
/// time-dependent classical phase shared by all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcField {
    tones: Vec<Tone>,
    phase_process: Option<PhaseSchedule>,
}

impl AcField {
    pub fn new(tones: Vec<Tone>) -> Self {
        AcField {
            tones,
            phase_process: None,
        }
    }

    pub fn single(amplitude: f64, frequency: f64, theta: f64) -> Result<Self> {
        Ok(AcField::new(vec![Tone::new(amplitude, frequency, theta)?]))
    }

    pub fn zero() -> Self {
        AcField::new(Vec::new())
    }

    pub fn with_phase_process(mut self, schedule: PhaseSchedule) -> Self {
        self.phase_process = Some(schedule);
        self
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn phase_process(&self) -> Option<&PhaseSchedule> {
        self.phase_process.as_ref()
    }

    /// Phase of `tone` at time `t`, honouring the override if present.
    pub fn theta_at(&self, tone: &Tone, t: f64) -> f64 {
        match &self.phase_process {
            Some(s) => s.theta_at(t),
            None => tone.theta,
        }
    }

    /// `b_z(t)` in tesla.
    pub fn value_at(&self, t: f64) -> f64 {
        self.tones
            .iter()
            .map(|tone| tone.amplitude * (tone.omega() * t - self.theta_at(tone, t)).cos())
            .sum()
    }

    /// The same field with every amplitude multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        AcField {
            tones: self
                .tones
                .iter()
                .map(|t| Tone {
                    amplitude: t.amplitude * c,
                    ..*t
                })
                .collect(),
            phase_process: self.phase_process.clone(),
        }
    }
}
