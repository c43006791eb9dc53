//! CSV layouts for the figure datasets. All quantities are in SI base
//! units (tesla, hertz, seconds, radians).

use super::scenarios::{
    AmplitudePoint, FrequencyShiftPoint, PhasePoint, ScenarioTrace,
    TimeConstantPoint, TwoToneOutcome,
};
use super::sensitivity::{ConfigScore, SensitivityPoint};
use crate::dataset::Table;
use crate::lockin::LockinResult;
use crate::pea::PosteriorGrid;

/// `fig2c.csv`: I-channel field estimate against drive amplitude.
pub fn fig2c_table(points: &[AmplitudePoint]) -> Table {
    let mut t = Table::new(&["b_ac", "b_mle", "theta", "trial", "seed", "phi_i"]);
    for p in points {
        t.push(vec![
            p.b_ac.into(),
            p.b_mle.into(),
            p.theta.into(),
            p.trial.into(),
            p.seed.into(),
            p.phi_i.into(),
        ]);
    }
    t
}

/// `fig2d.csv`: minimum detectable field against amplitude per method.
pub fn fig2d_table(points: &[SensitivityPoint]) -> Table {
    let mut t = Table::new(&["b_ac", "method", "delta_b"]);
    for p in points {
        t.push(vec![p.b_ac.into(), p.method.to_string().into(), p.delta_b.into()]);
    }
    t
}

/// Dynamic-range scores of a configuration sweep.
pub fn config_sweep_table(scores: &[ConfigScore]) -> Table {
    let mut t = Table::new(&[
        "levels",
        "m_k",
        "f",
        "time_constant",
        "sigma_phi",
        "delta_b",
        "b_max",
        "dr",
    ]);
    for s in scores {
        t.push(vec![
            s.levels.into(),
            s.m_k.into(),
            s.f.into(),
            s.time_constant.into(),
            s.sigma_phi.into(),
            s.report.delta_b.into(),
            s.report.b_max.into(),
            s.report.dr.into(),
        ]);
    }
    t
}

fn lockin_cells(r: &LockinResult) -> Vec<crate::dataset::Cell> {
    vec![
        r.seed.into(),
        r.phi_i.into(),
        r.phi_q.into(),
        r.theta_est.into(),
        r.phi_r.into(),
        r.b_mle.into(),
        r.model_time.into(),
    ]
}

const LOCKIN_HEADERS: [&str; 7] = ["seed", "phi_i", "phi_q", "theta_est", "phi_r", "b_mle", "model_time"];

/// `fig3.csv`: quadrature reconstruction over the field phase.
pub fn fig3_table(points: &[PhasePoint]) -> Table {
    let mut headers = vec!["b_ac", "theta", "trial"];
    headers.extend(LOCKIN_HEADERS);
    let mut t = Table::new(&headers);
    for p in points {
        let mut row = vec![p.b_ac.into(), p.theta.into(), p.trial.into()];
        row.extend(lockin_cells(&p.result));
        t.push(row);
    }
    t
}

/// Trace layout shared by `fig4a.csv` and the random-phase dataset.
pub fn trace_table(trace: &ScenarioTrace) -> Table {
    let mut t = Table::new(&["step", "time", "truth", "estimate", "raw", "channel", "seed"]);
    for p in &trace.points {
        t.push(vec![
            p.step.into(),
            p.time.into(),
            p.truth.into(),
            p.estimate.into(),
            p.raw.into(),
            format!("{:?}", p.channel).into(),
            p.seed.into(),
        ]);
    }
    t
}

/// `fig4a.csv`.
pub fn fig4a_table(trace: &ScenarioTrace) -> Table {
    trace_table(trace)
}

/// `fig4b.csv`: dual-channel readout against detuning.
pub fn fig4b_table(points: &[FrequencyShiftPoint]) -> Table {
    let mut headers = vec!["delta_f", "trial"];
    headers.extend(LOCKIN_HEADERS);
    let mut t = Table::new(&headers);
    for p in points {
        let mut row = vec![p.delta_f.into(), p.trial.into()];
        row.extend(lockin_cells(&p.result));
        t.push(row);
    }
    t
}

/// CP in-phase signal against tone frequency.
pub fn cp_response_table(frequencies: &[f64], signal: &[f64]) -> Table {
    let mut t = Table::new(&["f_ac", "signal"]);
    for (&f, &s) in frequencies.iter().zip(signal) {
        t.push(vec![f.into(), s.into()]);
    }
    t
}

/// `si_s5.csv`: time constants at fixed longest sequence.
pub fn si_s5_table(points: &[TimeConstantPoint]) -> Table {
    let mut t = Table::new(&["levels", "f_ac", "tau", "time_constant", "sigma_phi", "delta_b", "eta"]);
    for p in points {
        t.push(vec![
            p.levels.into(),
            p.f_ac.into(),
            p.tau.into(),
            p.time_constant.into(),
            p.sigma_phi.into(),
            p.delta_b.into(),
            p.eta.into(),
        ]);
    }
    t
}

/// `si_s6.csv`: normalized I and Q posterior densities of two-tone runs.
pub fn si_s6_table(outcomes: &[TwoToneOutcome]) -> Table {
    let mut t = Table::new(&["df0", "channel", "phi", "density"]);
    for o in outcomes {
        for (name, post) in [("I", &o.i_posterior), ("Q", &o.q_posterior)] {
            push_density(&mut t, o.df0, name, post);
        }
    }
    t
}

fn push_density(t: &mut Table, df0: f64, channel: &str, post: &PosteriorGrid) {
    for (&phi, d) in post.phi_values().iter().zip(post.density()) {
        t.push(vec![df0.into(), channel.into(), phi.into(), d.into()]);
    }
}

/// Allowed lock-in frequencies, `p = 1, 2, ...`.
pub fn frequencies_table(frequencies: &[f64]) -> Table {
    let mut t = Table::new(&["p", "frequency"]);
    for (i, &f) in frequencies.iter().enumerate() {
        t.push(vec![(i + 1).into(), f.into()]);
    }
    t
}
