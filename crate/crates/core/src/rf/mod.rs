//! Received signal strength generation.
//!
//! Readings come from one of two sources per beacon: the parametric
//! log-distance model in [`predict_rss`], or replay of a measured
//! [`FingerprintGrid`] through [`replay_rss`]. [`PhysicalEnv`] owns the random
//! state (crowd process and one noise stream per beacon) so that a seed fixes
//! the environment independently of where the player walks.

mod config;
mod crowd;
mod env;
mod fingerprint;
mod model;

use serde::{Deserialize, Serialize};

pub use config::{ConfigError, CrowdConfig, PropagationConfig, REFERENCE_TX_POWER_DBM};
pub use crowd::{crowd_attenuation, CrowdAttenuation, CrowdState};
pub use env::{EnvTrace, PhysicalEnv, SignalModel};
pub use fingerprint::{
    replay_rss, survey_grid, FingerprintGrid, GridError, GridSummary, Reading, ReplayOutcome,
    GRID_CSV_HEADER,
};
pub use model::{mean_rss, orientation_loss, predict_rss};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssSample {
    pub beacon_id: String,
    pub timestamp_s: f64,
    pub rssi_dbm: f64,
}
