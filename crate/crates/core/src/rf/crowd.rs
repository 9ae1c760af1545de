use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

use super::config::CrowdConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrowdAttenuation {
    pub loss_db: f64,
    pub fully_blocked: bool,
}

impl CrowdAttenuation {
    pub const CLEAR: CrowdAttenuation = CrowdAttenuation { loss_db: 0.0, fully_blocked: false };
}

/// State of the crowd chain. `second` is the number of whole seconds the
/// chain has been advanced through.
#[derive(Debug, Clone, PartialEq)]
pub struct CrowdState {
    pub crowded: bool,
    pub second: u64,
    pub current: CrowdAttenuation,
}

impl Default for CrowdState {
    fn default() -> Self {
        Self { crowded: false, second: 0, current: CrowdAttenuation::CLEAR }
    }
}

impl CrowdState {
    fn step(&mut self, config: &CrowdConfig, rng: &mut RngStream) {
        // Two uniforms and one bernoulli per second keep the stream layout fixed.
        let flip = rng.uniform();
        let loss = rng.uniform_range(config.attenuation_range_db.0, config.attenuation_range_db.1);
        let block = rng.uniform();
        self.crowded = if self.crowded {
            flip >= config.off_probability()
        } else {
            flip < config.on_probability
        };
        self.current = if self.crowded {
            CrowdAttenuation { loss_db: loss, fully_blocked: block < config.full_block_probability }
        } else {
            CrowdAttenuation::CLEAR
        };
        self.second += 1;
    }
}

/// Advances the chain through every whole second up to `clock_s` and returns
/// the attenuation in effect at `clock_s`. Querying an earlier time returns
/// the current value without rewinding.
pub fn crowd_attenuation(
    config: &CrowdConfig,
    state: &mut CrowdState,
    clock_s: f64,
    rng: &mut RngStream,
) -> CrowdAttenuation {
    let target = if clock_s.is_finite() && clock_s > 0.0 { clock_s.floor() as u64 } else { 0 };
    while state.second < target {
        state.step(config, rng);
    }
    state.current
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_on_probability_never_attenuates() {
        let cfg = CrowdConfig::none();
        let mut st = CrowdState::default();
        let mut rng = RngStream::new(9);
        for t in 0..5000 {
            let a = crowd_attenuation(&cfg, &mut st, f64::from(t), &mut rng);
            assert_eq!(a, CrowdAttenuation::CLEAR);
        }
    }

    #[test]
    fn certain_block_while_crowded() {
        let cfg = CrowdConfig { on_probability: 1.0, full_block_probability: 1.0, ..CrowdConfig::default() };
        let mut st = CrowdState::default();
        let mut rng = RngStream::new(9);
        let a = crowd_attenuation(&cfg, &mut st, 1.0, &mut rng);
        assert!(st.crowded);
        assert!(a.fully_blocked);
    }

    #[test]
    fn attenuation_within_range() {
        let cfg = CrowdConfig { on_probability: 0.5, ..CrowdConfig::default() };
        let mut st = CrowdState::default();
        let mut rng = RngStream::new(2);
        for t in 1..2000 {
            let a = crowd_attenuation(&cfg, &mut st, f64::from(t), &mut rng);
            if st.crowded {
                assert!((5.0..=15.0).contains(&a.loss_db));
            } else {
                assert_eq!(a.loss_db, 0.0);
            }
        }
    }

    #[test]
    fn empirical_on_fraction_matches_stationary_distribution() {
        let cfg = CrowdConfig::default();
        let mut st = CrowdState::default();
        let mut rng = RngStream::new(2024);
        let steps = 100_000u64;
        let mut on = 0u64;
        for t in 1..=steps {
            crowd_attenuation(&cfg, &mut st, t as f64, &mut rng);
            on += u64::from(st.crowded);
        }
        let empirical = on as f64 / steps as f64;
        // closed form p / (p + q) for the two-state chain
        let analytic = cfg.on_probability / (cfg.on_probability + 1.0 / cfg.mean_dwell_s);
        assert!((empirical - analytic).abs() <= 0.1 * analytic, "{empirical} vs {analytic}");
    }
}
