use crate::pea::PeaConfig;
use crate::physics::SensorParams;

/// Reference cells per run times repetitions,
/// `R [M_K(2^K − 1) + F(2^K − K − 1)]`.
pub fn time_constant_cells(config: &PeaConfig, params: &SensorParams) -> u64 {
    let two_k = 1u64 << config.levels;
    let k = config.levels as u64;
    params.reps as u64 * (config.m_k as u64 * (two_k - 1) + config.f as u64 * (two_k - k - 1))
}

/// Model time of one estimator run, `R(τ + t_M)[M_K(2^K − 1) + F(2^K − K − 1)]`.
pub fn time_constant(config: &PeaConfig, params: &SensorParams) -> f64 {
    time_constant_cells(config, params) as f64 * (config.tau + params.t_m)
}

/// Frequencies and level counts for which the longest sequence
/// `2^(K−1) τ` equals `longest`, for `K = 1..=max_levels`.
pub fn fixed_length_schedule(longest: f64, max_levels: u32) -> Vec<(u32, f64)> {
    (1..=max_levels)
        .map(|k| {
            let tau = longest / (1u64 << (k - 1)) as f64;
            (k, 1.0 / tau)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::Channel;

    #[test]
    fn worked_value() {
        let params = SensorParams::default();
        let cfg = PeaConfig::new(48e-6, Channel::I);
        let t = time_constant(&cfg, &params);
        assert!((t - 171.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn single_level() {
        let params = SensorParams::default();
        let mut cfg = PeaConfig::new(48e-6, Channel::I);
        cfg.levels = 1;
        cfg.f = 0;
        cfg.m_k = 7;
        let expected = params.reps as f64 * (48e-6 + params.t_m) * 7.0;
        assert!((time_constant(&cfg, &params) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn closed_form_matches_schedule_sum() {
        let params = SensorParams::default();
        for levels in 1..10 {
            for m_k in 1..6 {
                for f in 0..5 {
                    let mut cfg = PeaConfig::new(30e-6, Channel::I);
                    cfg.levels = levels;
                    cfg.m_k = m_k;
                    cfg.f = f;
                    assert_eq!(
                        time_constant_cells(&cfg, &params),
                        cfg.cell_count() * params.reps as u64
                    );
                }
            }
        }
    }

    #[test]
    fn schedule_keeps_longest_fixed() {
        for (k, f) in fixed_length_schedule(256e-6, 6) {
            let longest = (1u64 << (k - 1)) as f64 / f;
            assert!((longest - 256e-6).abs() < 1e-18);
        }
    }
}
