//! Quantitative comparisons and figure scenarios built on the estimator.

mod ensemble;
pub mod figures;
mod scenarios;
mod sensitivity;
mod timing;

pub use ensemble::{circular_mean, phase_ensemble, sample_std, wrapped_std};
pub use scenarios::{
    amplitude_sweep, frequency_shift_scenario, phase_sweep, random_phase_scenario,
    telegraph_scenario, time_constant_sweep, two_tone_scenario, uniformity_p_value,
    AmplitudePoint, FrequencyShiftPoint, PhaseDistribution, PhasePoint, RandomPhaseOutcome,
    ScenarioTrace, TimeConstantPoint, TraceChannel, TracePoint, TwoToneOutcome,
};
pub use sensitivity::{
    b_ac_max, cp_delta_b, cp_report, cp_sensitivity, pea_delta_b, pea_report, sensitivity_sweep,
    sweep_pea_configs, ConfigScore, Method, SensitivityPoint, SensitivityReport,
};
pub use timing::{fixed_length_schedule, time_constant, time_constant_cells};
