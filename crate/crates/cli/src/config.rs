//! TOML run configuration in lab units (nT, kHz, µs, gauss, degrees).

use std::fmt;
use std::str::FromStr;

use qlockin::lockin::DualMode;
use qlockin::pea::{LevelOrder, PeaConfig};
use qlockin::physics::{AcField, Channel, SensorParams, Tone};
use qlockin::readout::{MeasurementModel, PhotonCountModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: &str, reason: impl Into<String>) -> Self {
        ConfigError {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SweepAmplitude,
    SweepPhase,
    Sensitivity,
    Telegraph,
    RandomPhase,
    FreqShift,
    TwoTone,
    TimeConstants,
    Frequencies,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::SweepAmplitude,
        Experiment::SweepPhase,
        Experiment::Sensitivity,
        Experiment::Telegraph,
        Experiment::RandomPhase,
        Experiment::FreqShift,
        Experiment::TwoTone,
        Experiment::TimeConstants,
        Experiment::Frequencies,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SweepAmplitude => "sweep-amplitude",
            Experiment::SweepPhase => "sweep-phase",
            Experiment::Sensitivity => "sensitivity",
            Experiment::Telegraph => "telegraph",
            Experiment::RandomPhase => "random-phase",
            Experiment::FreqShift => "freq-shift",
            Experiment::TwoTone => "two-tone",
            Experiment::TimeConstants => "time-constants",
            Experiment::Frequencies => "frequencies",
        }
    }

    /// Base name of the main CSV file.
    pub fn dataset(self) -> &'static str {
        match self {
            Experiment::SweepAmplitude => "fig2c",
            Experiment::Sensitivity => "fig2d",
            Experiment::SweepPhase => "fig3",
            Experiment::Telegraph => "fig4a",
            Experiment::FreqShift => "fig4b",
            Experiment::RandomPhase => "si_s4",
            Experiment::TimeConstants => "si_s5",
            Experiment::TwoTone => "si_s6",
            Experiment::Frequencies => "frequencies",
        }
    }

    fn needs_field(self) -> bool {
        matches!(
            self,
            Experiment::Telegraph | Experiment::RandomPhase | Experiment::FreqShift | Experiment::TwoTone
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                ConfigError::new("experiment", format!("unknown experiment `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutModel {
    /// Ideal bit flipped with probability `1 − readout_fidelity`.
    Direct,
    /// Thresholded Poisson photon counts tuned to `readout_fidelity`.
    PhotonCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub gamma_e_ghz_per_t: f64,
    pub gamma_n_mhz_per_t: f64,
    pub b0_gauss: f64,
    pub t2_us: f64,
    pub s_exp: f64,
    pub alpha_exp: f64,
    pub visibility: f64,
    pub collection_factor: f64,
    /// Replace `collection_factor` by the value that matches the CP formula
    /// to the digitised readout, `V √ξ = (2f − 1)/√R`.
    pub match_readout: bool,
    pub readout_fidelity: f64,
    pub reps: u32,
    pub t_m_us: f64,
    pub readout_model: ReadoutModel,
}

impl Default for SensorConfig {
    fn default() -> Self {
        let p = SensorParams::default();
        SensorConfig {
            gamma_e_ghz_per_t: 27.99,
            gamma_n_mhz_per_t: 10.705,
            b0_gauss: p.b0 * 1e4,
            t2_us: p.t2 * 1e6,
            s_exp: p.s_exp,
            alpha_exp: p.alpha_exp,
            visibility: p.visibility,
            collection_factor: p.collection_factor,
            match_readout: false,
            readout_fidelity: p.readout_fidelity,
            reps: p.reps,
            t_m_us: p.t_m * 1e6,
            readout_model: ReadoutModel::Direct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeaSettings {
    /// Lock-in reference frequency `1/τ`.
    pub lockin_khz: f64,
    pub levels: u32,
    pub m_k: u32,
    pub f: u32,
    pub readout_phases_deg: Vec<f64>,
    pub grid_size: usize,
    pub order: Order,
    pub dual_mode: Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    Descending,
    Ascending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dual {
    Sequential,
    Interleaved,
}

impl Default for PeaSettings {
    fn default() -> Self {
        PeaSettings {
            lockin_khz: 20.83,
            levels: 5,
            m_k: 4,
            f: 4,
            readout_phases_deg: vec![0.0, 90.0],
            grid_size: 4096,
            order: Order::Descending,
            dual_mode: Dual::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub amplitude_nt: f64,
    /// Defaults to the lock-in frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_khz: Option<f64>,
    #[serde(default)]
    pub theta_deg: f64,
    /// Additional tones on top of the main one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_tones: Vec<ToneConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub amplitude_nt: f64,
    pub frequency_khz: f64,
    #[serde(default)]
    pub theta_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    Uniform,
    RandomWalk,
}

/// Experiment-specific knobs. Each experiment reads only the keys it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Fraction of `(−b_max, b_max)` covered by amplitude sweeps.
    pub span: f64,
    pub points: u32,
    /// Field phases of `sweep-amplitude`.
    pub thetas_deg: Vec<f64>,
    /// Phase step of `sweep-phase` over 0..=360°.
    pub theta_step_deg: f64,
    /// Amplitudes of `sweep-phase`; empty means the field amplitude.
    pub amplitudes_nt: Vec<f64>,
    /// CP pulse counts compared in `sensitivity` and `freq-shift`.
    pub cp_pulses: Vec<u32>,
    pub integration_time_s: f64,
    pub steps: u32,
    pub flip_probability: f64,
    pub distribution: Distribution,
    pub step_sd_deg: f64,
    /// Detunings `δf / f0` of `freq-shift`.
    pub relative_shifts: Vec<f64>,
    /// Second-tone offsets of `two-tone`.
    pub df0_hz: Vec<f64>,
    pub longest_us: f64,
    pub max_levels: u32,
    /// Field as a fraction of `b_max` for `time-constants`.
    pub fraction: f64,
    pub p_max: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            span: 0.9,
            points: 21,
            thetas_deg: vec![0.0, 180.0],
            theta_step_deg: 15.0,
            amplitudes_nt: Vec::new(),
            cp_pulses: vec![2, 16],
            integration_time_s: 150.0,
            steps: 50,
            flip_probability: 0.5,
            distribution: Distribution::Uniform,
            step_sd_deg: 1.0,
            relative_shifts: vec![-0.04, -0.02, -0.01, -0.005, 0.0, 0.005, 0.01, 0.02, 0.04],
            df0_hz: vec![0.0, 200.0, 500.0],
            longest_us: 256.0,
            max_levels: 6,
            fraction: 0.3,
            p_max: 20,
        }
    }
}

fn default_trials() -> u32 {
    20
}

/// A complete run description. `experiment` may be left out when the
/// command line names it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u32,
    /// Output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub pea: PeaSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub scenario: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            seed: 0,
            trials: default_trials(),
            output: None,
            sensor: SensorConfig::default(),
            pea: PeaSettings::default(),
            field: None,
            scenario: ScenarioConfig::default(),
        }
    }
}

/// Parse and validate a TOML document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::new("config", e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Serialize back to TOML; `parse_config` of the result reproduces `config`.
pub fn emit_config(config: &RunConfig) -> Result<String, ConfigError> {
    toml::to_string(config).map_err(|e| ConfigError::new("config", e.to_string()))
}

fn sensor_key(core: &str) -> String {
    let lab = match core {
        "gamma_e" => "gamma_e_ghz_per_t",
        "gamma_n" => "gamma_n_mhz_per_t",
        "b0" => "b0_gauss",
        "t2" => "t2_us",
        "t_m" => "t_m_us",
        other => other,
    };
    format!("sensor.{lab}")
}

fn pea_key(core: &str) -> String {
    let lab = match core {
        "tau" => "lockin_khz",
        "readout_phases" => "readout_phases_deg",
        other => other,
    };
    format!("pea.{lab}")
}

fn core_error(prefix: fn(&str) -> String, e: qlockin::Error) -> ConfigError {
    match e {
        qlockin::Error::Config { key, reason } => ConfigError { key: prefix(&key), reason },
        other => ConfigError::new("config", other.to_string()),
    }
}

fn finite_positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Built-in configurations for the published figure datasets.
    pub fn preset(name: &str) -> Option<RunConfig> {
        let mut c = RunConfig::default();
        let field = |nt: f64| {
            Some(FieldConfig {
                amplitude_nt: nt,
                frequency_khz: None,
                theta_deg: 0.0,
                extra_tones: Vec::new(),
            })
        };
        match name {
            "fig2c" => c.experiment = Some(Experiment::SweepAmplitude),
            "fig2d" => {
                c.experiment = Some(Experiment::Sensitivity);
                c.trials = 200;
                c.scenario.points = 19;
                c.sensor.match_readout = true;
            }
            "fig3" => {
                c.experiment = Some(Experiment::SweepPhase);
                c.field = field(476.0);
                c.scenario.amplitudes_nt = vec![238.0, 476.0];
            }
            "fig4a" => {
                c.experiment = Some(Experiment::Telegraph);
                c.field = field(476.0);
            }
            "fig4b" => {
                c.experiment = Some(Experiment::FreqShift);
                c.field = field(173.0);
            }
            "si_s4" => {
                c.experiment = Some(Experiment::RandomPhase);
                c.field = field(476.0);
                c.scenario.distribution = Distribution::RandomWalk;
                c.scenario.steps = 100;
            }
            "si_s5" => {
                c.experiment = Some(Experiment::TimeConstants);
                c.trials = 100;
            }
            "si_s6" => {
                c.experiment = Some(Experiment::TwoTone);
                c.field = field(86.5);
            }
            "frequencies" => c.experiment = Some(Experiment::Frequencies),
            _ => return None,
        }
        Some(c)
    }

    pub const PRESETS: [&'static str; 9] =
        ["fig2c", "fig2d", "fig3", "fig4a", "fig4b", "si_s4", "si_s5", "si_s6", "frequencies"];

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sensor_params()?;
        self.pea_config()?;
        if self.trials == 0 {
            return Err(ConfigError::new("trials", "must be at least 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::new("seed", "must fit in a signed 64-bit TOML integer"));
        }
        if let Some(f) = &self.field {
            if !(f.amplitude_nt.is_finite() && f.amplitude_nt >= 0.0) {
                return Err(ConfigError::new("field.amplitude_nt", "must be non-negative and finite"));
            }
            if let Some(khz) = f.frequency_khz {
                finite_positive("field.frequency_khz", khz)?;
            }
            if !f.theta_deg.is_finite() {
                return Err(ConfigError::new("field.theta_deg", "must be finite"));
            }
            for t in &f.extra_tones {
                if !(t.amplitude_nt.is_finite() && t.amplitude_nt >= 0.0) {
                    return Err(ConfigError::new("field.extra_tones.amplitude_nt", "must be non-negative and finite"));
                }
                finite_positive("field.extra_tones.frequency_khz", t.frequency_khz)?;
            }
        }
        let s = &self.scenario;
        if !(s.span > 0.0 && s.span <= 1.0) {
            return Err(ConfigError::new("scenario.span", format!("must be in (0, 1], got {}", s.span)));
        }
        if s.points < 2 {
            return Err(ConfigError::new("scenario.points", "must be at least 2"));
        }
        finite_positive("scenario.theta_step_deg", s.theta_step_deg)?;
        finite_positive("scenario.integration_time_s", s.integration_time_s)?;
        finite_positive("scenario.longest_us", s.longest_us)?;
        if s.cp_pulses.iter().any(|&p| p == 0 || p % 2 == 1) {
            return Err(ConfigError::new("scenario.cp_pulses", "pulse counts must be even and positive"));
        }
        if !(0.0..=1.0).contains(&s.flip_probability) {
            return Err(ConfigError::new("scenario.flip_probability", "must be in [0, 1]"));
        }
        if !(s.step_sd_deg.is_finite() && s.step_sd_deg >= 0.0) {
            return Err(ConfigError::new("scenario.step_sd_deg", "must be non-negative"));
        }
        if s.relative_shifts.iter().any(|r| !(r.is_finite() && *r > -1.0)) {
            return Err(ConfigError::new("scenario.relative_shifts", "shifts must be finite and above −1"));
        }
        if s.max_levels == 0 || s.max_levels > 24 {
            return Err(ConfigError::new("scenario.max_levels", "must be in 1..=24"));
        }
        if !(s.fraction.is_finite() && s.fraction.abs() <= 1.0) {
            return Err(ConfigError::new("scenario.fraction", "must be in [−1, 1]"));
        }
        if s.p_max == 0 {
            return Err(ConfigError::new("scenario.p_max", "must be at least 1"));
        }
        if s.amplitudes_nt.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(ConfigError::new("scenario.amplitudes_nt", "must be non-negative and finite"));
        }
        Ok(())
    }

    /// Check that the experiment has everything it needs.
    pub fn validate_for(&self, experiment: Experiment) -> Result<(), ConfigError> {
        self.validate()?;
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(ConfigError::new(
                    "experiment",
                    format!("config is for `{e}` but `{experiment}` was requested"),
                ));
            }
        }
        let phase_sweep_has_amplitudes =
            experiment == Experiment::SweepPhase && !self.scenario.amplitudes_nt.is_empty();
        if (experiment.needs_field() || experiment == Experiment::SweepPhase)
            && self.field.is_none()
            && !phase_sweep_has_amplitudes
        {
            return Err(ConfigError::new(
                "field.amplitude_nt",
                format!("required for experiment `{experiment}`"),
            ));
        }
        if experiment == Experiment::FreqShift && self.scenario.cp_pulses.is_empty() {
            return Err(ConfigError::new("scenario.cp_pulses", "needs at least one entry"));
        }
        Ok(())
    }

    pub fn sensor_params(&self) -> Result<SensorParams, ConfigError> {
        let s = &self.sensor;
        let p = SensorParams {
            gamma_e: 2.0 * std::f64::consts::PI * s.gamma_e_ghz_per_t * 1e9,
            gamma_n: 2.0 * std::f64::consts::PI * s.gamma_n_mhz_per_t * 1e6,
            b0: s.b0_gauss * 1e-4,
            t2: s.t2_us * 1e-6,
            s_exp: s.s_exp,
            alpha_exp: s.alpha_exp,
            visibility: s.visibility,
            collection_factor: s.collection_factor,
            readout_fidelity: s.readout_fidelity,
            reps: s.reps,
            t_m: s.t_m_us * 1e-6,
        };
        p.validate().map_err(|e| core_error(sensor_key, e))?;
        Ok(if s.match_readout { p.with_matched_readout() } else { p })
    }

    pub fn tau(&self) -> f64 {
        1.0 / (self.pea.lockin_khz * 1e3)
    }

    pub fn pea_config(&self) -> Result<PeaConfig, ConfigError> {
        finite_positive("pea.lockin_khz", self.pea.lockin_khz)?;
        let mut c = PeaConfig::new(self.tau(), Channel::I);
        c.levels = self.pea.levels;
        c.m_k = self.pea.m_k;
        c.f = self.pea.f;
        c.readout_phases = self.pea.readout_phases_deg.iter().map(|d| d.to_radians()).collect();
        c.grid_size = self.pea.grid_size;
        c.order = match self.pea.order {
            Order::Descending => LevelOrder::Descending,
            Order::Ascending => LevelOrder::Ascending,
        };
        c.validate().map_err(|e| core_error(pea_key, e))?;
        Ok(c)
    }

    pub fn dual_mode(&self) -> DualMode {
        match self.pea.dual_mode {
            Dual::Sequential => DualMode::Sequential,
            Dual::Interleaved => DualMode::Interleaved,
        }
    }

    pub fn measurement_model(&self) -> Result<MeasurementModel, ConfigError> {
        let key = |e: qlockin::Error| core_error(sensor_key, e);
        match self.sensor.readout_model {
            ReadoutModel::Direct => MeasurementModel::direct(self.sensor.readout_fidelity).map_err(key),
            ReadoutModel::PhotonCount => {
                let m = PhotonCountModel::tuned(self.sensor.readout_fidelity, self.sensor.visibility, self.sensor.reps)
                    .map_err(key)?;
                Ok(MeasurementModel::PhotonCount(m))
            }
        }
    }

    /// Field amplitude in tesla, if a field is configured.
    pub fn amplitude(&self) -> Option<f64> {
        self.field.as_ref().map(|f| f.amplitude_nt * 1e-9)
    }

    /// The configured field with its main tone at `amplitude` tesla.
    pub fn field_with_amplitude(&self, amplitude: f64) -> Result<AcField, ConfigError> {
        let f0 = self.pea.lockin_khz * 1e3;
        let key = |e: qlockin::Error| core_error(|k| format!("field.{k}"), e);
        let Some(fc) = &self.field else {
            return AcField::single(amplitude, f0, 0.0).map_err(key);
        };
        let mut tones = vec![Tone::new(
            amplitude,
            fc.frequency_khz.map_or(f0, |k| k * 1e3),
            fc.theta_deg.to_radians(),
        )
        .map_err(key)?];
        for t in &fc.extra_tones {
            tones.push(Tone::new(t.amplitude_nt * 1e-9, t.frequency_khz * 1e3, t.theta_deg.to_radians()).map_err(key)?);
        }
        Ok(AcField::new(tones))
    }
}
