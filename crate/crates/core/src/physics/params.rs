use serde::{Deserialize, Serialize};

use super::{GAMMA_E, GAMMA_N};
use crate::error::{Error, Result};

/// Physical constants and noise parameters of the sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    pub gamma_e: f64,
    pub gamma_n: f64,
    /// DC bias field along the NV axis, tesla.
    pub b0: f64,
    /// Hahn-echo coherence time, seconds.
    pub t2: f64,
    /// Coherence scaling with pulse number, `T2(m) = T2 m^s`.
    pub s_exp: f64,
    /// Stretch exponent of the decay envelope.
    pub alpha_exp: f64,
    pub visibility: f64,
    /// Photon collection factor ξ entering the CP sensitivity.
    pub collection_factor: f64,
    pub readout_fidelity: f64,
    /// Sequence repetitions behind one digitised bit.
    pub reps: u32,
    /// Optical readout time per repetition, seconds.
    pub t_m: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            gamma_e: GAMMA_E,
            gamma_n: GAMMA_N,
            b0: 0.047,
            t2: 190e-6,
            s_exp: 0.5,
            alpha_exp: 3.0,
            visibility: 0.3,
            collection_factor: 1.0,
            readout_fidelity: 0.97,
            reps: 15_000,
            t_m: 2e-6,
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_e", self.gamma_e),
            ("gamma_n", self.gamma_n),
            ("b0", self.b0),
            ("t2", self.t2),
            ("s_exp", self.s_exp),
            ("alpha_exp", self.alpha_exp),
            ("collection_factor", self.collection_factor),
            ("t_m", self.t_m),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::config(
                "visibility",
                format!("must be in (0, 1], got {}", self.visibility),
            ));
        }
        if !(self.readout_fidelity > 0.5 && self.readout_fidelity <= 1.0) {
            return Err(Error::config(
                "readout_fidelity",
                format!("must be in (0.5, 1], got {}", self.readout_fidelity),
            ));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "must be at least 1"));
        }
        Ok(())
    }

    /// Collection factor for which the CP sensitivity formula describes the
    /// same digitised readout the estimator sees: one bit of contrast
    /// `2f − 1` per `reps` shots, i.e. `V √ξ = (2f − 1)/√R`.
    pub fn readout_matched_collection_factor(&self) -> f64 {
        let c = (2.0 * self.readout_fidelity - 1.0) / (self.reps as f64).sqrt();
        (c / self.visibility).powi(2)
    }

    /// Copy with `collection_factor` set to the readout-matched value.
    pub fn with_matched_readout(&self) -> Self {
        SensorParams {
            collection_factor: self.readout_matched_collection_factor(),
            ..self.clone()
        }
    }
}
