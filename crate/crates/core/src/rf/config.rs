use serde::{Deserialize, Serialize};
use thiserror::Error;

/// TX power the default `measured_power_1m_dbm` was calibrated at. Beacons
/// configured differently shift their 1 m reading by the difference.
pub const REFERENCE_TX_POWER_DBM: f64 = -4.0;

#[derive(Debug, Error, PartialEq)]
#[error("invalid propagation config: {0}")]
pub struct ConfigError(pub String);

/// Two-state (clear / crowded) Markov process stepped once per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdConfig {
    /// Probability per second that a clear path becomes crowded.
    pub on_probability: f64,
    /// Mean duration of a crowded spell.
    pub mean_dwell_s: f64,
    pub attenuation_range_db: (f64, f64),
    /// Chance, per crowded second, that the crowd blocks the signal entirely.
    pub full_block_probability: f64,
}

impl Default for CrowdConfig {
    fn default() -> Self {
        Self {
            on_probability: 0.05,
            mean_dwell_s: 8.0,
            attenuation_range_db: (5.0, 15.0),
            full_block_probability: 0.1,
        }
    }
}

impl CrowdConfig {
    pub fn none() -> Self {
        Self { on_probability: 0.0, ..Self::default() }
    }

    /// Per-second probability of a crowded spell ending.
    pub fn off_probability(&self) -> f64 {
        if self.mean_dwell_s <= 1.0 {
            1.0
        } else {
            1.0 / self.mean_dwell_s
        }
    }

    /// Long-run fraction of crowded seconds.
    pub fn stationary_on_fraction(&self) -> f64 {
        let (p, q) = (self.on_probability, self.off_probability());
        if p + q == 0.0 {
            0.0
        } else {
            p / (p + q)
        }
    }

    // negated comparisons so that NaN fails as well
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [("on_probability", self.on_probability), ("full_block_probability", self.full_block_probability)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(self.mean_dwell_s > 0.0) {
            return Err(ConfigError("mean_dwell_s must be positive".into()));
        }
        let (lo, hi) = self.attenuation_range_db;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(ConfigError(format!("bad attenuation range ({lo}, {hi})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub measured_power_1m_dbm: f64,
    pub path_loss_exponent: f64,
    pub shelf_loss_db: f64,
    pub wall_loss_db: f64,
    pub orientation_max_loss_db: f64,
    pub noise_sigma_db: f64,
    pub detection_floor_dbm: f64,
    pub crowd: CrowdConfig,
    /// Disables noise and the crowd process.
    pub deterministic: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            measured_power_1m_dbm: -58.0,
            path_loss_exponent: 2.2,
            shelf_loss_db: 3.0,
            wall_loss_db: 10.0,
            orientation_max_loss_db: 10.0,
            noise_sigma_db: 3.2,
            detection_floor_dbm: -92.0,
            crowd: CrowdConfig::default(),
            deterministic: false,
        }
    }
}

impl PropagationConfig {
    pub fn deterministic() -> Self {
        Self { deterministic: true, ..Self::default() }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.path_loss_exponent > 0.0) {
            return Err(ConfigError("path_loss_exponent must be positive".into()));
        }
        if !(self.noise_sigma_db >= 0.0) {
            return Err(ConfigError("noise_sigma_db must be non-negative".into()));
        }
        if !(self.detection_floor_dbm < self.measured_power_1m_dbm) {
            return Err(ConfigError("detection floor must lie below the 1 m reading".into()));
        }
        self.crowd.validate()
    }
}
