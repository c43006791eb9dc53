//! Experiment dispatch and artifact writing.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use qlockin::analysis::{self, figures, time_constant, PhaseDistribution};
use qlockin::dataset::Table;
use qlockin::physics::{allowed_frequencies, cp_frequency_response, make_sequence, Channel};
use qlockin::seeds::derive_seed;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, Distribution, Experiment, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("simulation error: {0}")]
    Simulation(#[from] qlockin::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Simulation(_) => 3,
            RunError::Io { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Cli,
    Env,
    Config,
}

/// Seed precedence: command line, then `QLOCKIN_SEED`, then the config.
pub fn resolve_seed(cli: Option<u64>, env: Option<&str>, config: u64) -> Result<(u64, SeedSource), ConfigError> {
    if let Some(s) = cli {
        return Ok((s, SeedSource::Cli));
    }
    if let Some(text) = env {
        return text
            .trim()
            .parse()
            .map(|s| (s, SeedSource::Env))
            .map_err(|_| ConfigError {
                key: "QLOCKIN_SEED".into(),
                reason: format!("not an unsigned 64-bit integer: `{text}`"),
            });
    }
    Ok((config, SeedSource::Config))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub model_time: f64,
}

struct Dataset {
    tables: Vec<(String, Table)>,
    seeds: Vec<u64>,
    model_time: f64,
    summary: Value,
}

fn linspace(lo: f64, hi: f64, n: u32) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn simulate(experiment: Experiment, config: &RunConfig, seed: u64) -> Result<Dataset, RunError> {
    let params = config.sensor_params()?;
    let pea = config.pea_config()?;
    let model = config.measurement_model()?;
    let mode = config.dual_mode();
    let trials = config.trials;
    let s = &config.scenario;
    let tau = pea.tau;
    let t_c = time_constant(&pea, &params);
    let b_max = analysis::b_ac_max(tau, &params);
    let name = experiment.dataset().to_string();
    let data = match experiment {
        Experiment::SweepAmplitude => {
            let amps: Vec<f64> = linspace(-s.span, s.span, s.points).iter().map(|x| x * b_max).collect();
            let thetas: Vec<f64> = s.thetas_deg.iter().map(|d| d.to_radians()).collect();
            let pts = analysis::amplitude_sweep(&amps, &thetas, trials, &pea, &params, &model, seed)?;
            Dataset {
                seeds: pts.iter().map(|p| p.seed).collect(),
                model_time: pts.len() as f64 * t_c,
                summary: json!({ "b_max": b_max, "time_constant": t_c }),
                tables: vec![(name, figures::fig2c_table(&pts))],
            }
        }
        Experiment::Sensitivity => {
            let amps: Vec<f64> = linspace(-s.span, s.span, s.points).iter().map(|x| x * b_max).collect();
            let cells: Vec<u32> = s.cp_pulses.iter().map(|p| p / 2).collect();
            let pts = analysis::sensitivity_sweep(
                &amps,
                &cells,
                &pea,
                trials as usize,
                &params,
                &model,
                s.integration_time_s,
                seed,
            )?;
            let cp: Vec<_> = cells
                .iter()
                .map(|&n| analysis::cp_report(n, tau, &params, s.integration_time_s))
                .collect();
            let seeds = (0..amps.len() as u64)
                .flat_map(|lane| (0..trials as u64).map(move |i| derive_seed(seed, lane, i)))
                .collect();
            Dataset {
                seeds,
                model_time: (amps.len() as u64 * trials as u64) as f64 * t_c,
                summary: json!({ "b_max": b_max, "time_constant": t_c, "cp_reports": cp }),
                tables: vec![(name, figures::fig2d_table(&pts))],
            }
        }
        Experiment::SweepPhase => {
            let amps: Vec<f64> = if s.amplitudes_nt.is_empty() {
                vec![config.amplitude().unwrap_or(0.0)]
            } else {
                s.amplitudes_nt.iter().map(|a| a * 1e-9).collect()
            };
            let steps = (360.0 / s.theta_step_deg).floor() as u32;
            let thetas: Vec<f64> = (0..=steps).map(|i| (i as f64 * s.theta_step_deg).to_radians()).collect();
            let mut pts = Vec::new();
            for (i, &b) in amps.iter().enumerate() {
                pts.extend(analysis::phase_sweep(
                    b,
                    &thetas,
                    trials,
                    &pea,
                    &params,
                    &model,
                    mode,
                    derive_seed(seed, u64::MAX, i as u64),
                )?);
            }
            Dataset {
                seeds: pts.iter().map(|p| p.result.seed).collect(),
                model_time: pts.iter().map(|p| p.result.model_time).sum(),
                summary: json!({ "b_max": b_max, "amplitudes": amps }),
                tables: vec![(name, figures::fig3_table(&pts))],
            }
        }
        Experiment::Telegraph => {
            let b = config.amplitude().unwrap_or(0.0);
            let trace =
                analysis::telegraph_scenario(b, s.flip_probability, s.steps as usize, &pea, &params, &model, seed)?;
            Dataset {
                seeds: trace.points.iter().map(|p| p.seed).collect(),
                model_time: trace.points.len() as f64 * trace.step_time,
                summary: json!({
                    "fraction_correct": trace.fraction_within(1e-9),
                    "step_time": trace.step_time,
                }),
                tables: vec![(name, figures::fig4a_table(&trace))],
            }
        }
        Experiment::RandomPhase => {
            let b = config.amplitude().unwrap_or(0.0);
            let dist = match s.distribution {
                Distribution::Uniform => PhaseDistribution::Uniform,
                Distribution::RandomWalk => PhaseDistribution::RandomWalk {
                    step_sd: s.step_sd_deg.to_radians(),
                },
            };
            let out =
                analysis::random_phase_scenario(b, dist, s.steps as usize, &pea, &params, &model, mode, seed)?;
            let estimates: Vec<f64> = out.trace.points.iter().map(|p| p.estimate).collect();
            let p_value = match s.distribution {
                Distribution::Uniform => analysis::uniformity_p_value(&estimates, 20).ok(),
                Distribution::RandomWalk => None,
            };
            Dataset {
                seeds: out.trace.points.iter().map(|p| p.seed).collect(),
                model_time: out.trace.points.len() as f64 * out.trace.step_time,
                summary: json!({
                    "mean_jump_deg": out.mean_jump.to_degrees(),
                    "min_jump_deg": out.min_jump.to_degrees(),
                    "detected_fraction": out.detected_fraction,
                    "uniformity_p_value": p_value,
                }),
                tables: vec![(name, figures::trace_table(&out.trace))],
            }
        }
        Experiment::FreqShift => {
            let b = config.amplitude().unwrap_or(0.0);
            let pts = analysis::frequency_shift_scenario(b, &s.relative_shifts, trials, &pea, &params, &model, mode, seed)?;
            let signed: Vec<_> = pts.iter().filter(|p| p.delta_f != 0.0).collect();
            let sign_ok = signed.iter().filter(|p| p.result.phi_q.signum() == p.delta_f.signum()).count();
            let cells = s.cp_pulses.iter().copied().max().unwrap_or(16) / 2;
            let seq = make_sequence(tau, cells, Channel::I, 0.0)?;
            let lo = s.relative_shifts.iter().copied().fold(0.0, f64::min);
            let hi = s.relative_shifts.iter().copied().fold(0.0, f64::max);
            let grid: Vec<f64> = linspace(lo, hi, 81).iter().map(|r| (1.0 + r) / tau).collect();
            let response = cp_frequency_response(&seq, b, &grid, &params)?;
            Dataset {
                seeds: pts.iter().map(|p| p.result.seed).collect(),
                model_time: pts.iter().map(|p| p.result.model_time).sum(),
                summary: json!({
                    "q_sign_correct_fraction": sign_ok as f64 / signed.len().max(1) as f64,
                    "cp_pulses": 2 * cells,
                }),
                tables: vec![
                    (name, figures::fig4b_table(&pts)),
                    ("fig4b_cp".into(), figures::cp_response_table(&grid, &response)),
                ],
            }
        }
        Experiment::TwoTone => {
            let b = config.amplitude().unwrap_or(0.0);
            let outcomes = s
                .df0_hz
                .iter()
                .enumerate()
                .map(|(i, &df0)| analysis::two_tone_scenario(b, df0, &pea, &params, &model, derive_seed(seed, 0, i as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            let results: Vec<_> = outcomes.iter().map(|o| json!({ "df0": o.df0, "result": o.result })).collect();
            Dataset {
                seeds: outcomes.iter().map(|o| o.result.seed).collect(),
                model_time: outcomes.iter().map(|o| o.result.model_time).sum(),
                summary: json!({ "results": results }),
                tables: vec![(name, figures::si_s6_table(&outcomes))],
            }
        }
        Experiment::TimeConstants => {
            let pts = analysis::time_constant_sweep(
                s.longest_us * 1e-6,
                s.max_levels,
                &pea,
                s.fraction,
                trials as usize,
                &params,
                &model,
                seed,
            )?;
            let seeds = pts
                .iter()
                .flat_map(|p| (0..trials as u64).map(move |i| derive_seed(seed, p.levels as u64, i)))
                .collect();
            Dataset {
                seeds,
                model_time: pts.iter().map(|p| p.time_constant * trials as f64).sum(),
                summary: json!({ "longest_sequence": s.longest_us * 1e-6 }),
                tables: vec![(name, figures::si_s5_table(&pts))],
            }
        }
        Experiment::Frequencies => {
            let f = allowed_frequencies(&params, s.p_max)?;
            Dataset {
                seeds: Vec::new(),
                model_time: 0.0,
                summary: json!({ "larmor_frequency": params.gamma_n * params.b0 / (2.0 * PI) }),
                tables: vec![(name, figures::frequencies_table(&f))],
            }
        }
    };
    Ok(data)
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Run `experiment` and write `<dataset>.csv` (plus any companion tables)
/// and a `<dataset>.json` metadata sidecar into `out`.
pub fn run(
    experiment: Experiment,
    config: &RunConfig,
    seed: u64,
    seed_source: SeedSource,
    out: &Path,
) -> Result<RunSummary, RunError> {
    config.validate_for(experiment)?;
    let data = simulate(experiment, config, seed)?;
    std::fs::create_dir_all(out).map_err(|e| RunError::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let mut files = Vec::new();
    for (name, table) in &data.tables {
        let path = out.join(format!("{name}.csv"));
        write(&path, &table.to_csv()?)?;
        files.push(path);
    }
    let mut echo = config.clone();
    echo.experiment = Some(experiment);
    let meta = json!({
        "software": { "name": "qlockin", "version": env!("CARGO_PKG_VERSION") },
        "experiment": experiment.name(),
        "config": echo,
        "master_seed": seed,
        "seed_source": seed_source,
        "trial_seeds": data.seeds,
        "model_time_total": data.model_time,
        "files": data.tables.iter().map(|(n, _)| format!("{n}.csv")).collect::<Vec<_>>(),
        "summary": data.summary,
    });
    let meta_path = out.join(format!("{}.json", experiment.dataset()));
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    write(&meta_path, &text)?;
    files.push(meta_path);
    Ok(RunSummary {
        files,
        model_time: data.model_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), 3).unwrap(), (1, SeedSource::Cli));
        assert_eq!(resolve_seed(None, Some(" 2 "), 3).unwrap(), (2, SeedSource::Env));
        assert_eq!(resolve_seed(None, None, 3).unwrap(), (3, SeedSource::Config));
        assert_eq!(resolve_seed(None, Some("x"), 3).unwrap_err().key, "QLOCKIN_SEED");
    }

    #[test]
    fn exit_codes_differ_by_kind() {
        let c = RunError::Config(ConfigError { key: "k".into(), reason: "r".into() });
        let s = RunError::Simulation(qlockin::Error::Domain("d".into()));
        assert_eq!((c.exit_code(), s.exit_code()), (2, 3));
    }
}
