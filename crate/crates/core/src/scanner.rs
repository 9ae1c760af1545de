//! Beacon discovery and sliding-window statistics.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::rf::{mean_rss, PhysicalEnv, RssSample, SignalModel};
use crate::world::{PlayerState, World};

/// Slack for comparing timestamps built from integer advertisement counts.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub window_samples: usize,
    pub window_span_s: f64,
    pub window_step_s: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { window_samples: 50, window_span_s: 5.0, window_step_s: 1.0 }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.window_samples < 2 {
            return Err("window_samples must be at least 2".into());
        }
        if !(self.window_span_s > 0.0 && self.window_step_s > 0.0) {
            return Err("window span and step must be positive".into());
        }
        Ok(())
    }

    /// Samples a full window holds for a beacon advertising at `rate_hz`.
    pub fn expected_samples(&self, rate_hz: f64) -> usize {
        (self.window_span_s * rate_hz).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssWindow {
    pub beacon_id: String,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub n: usize,
    pub expected: usize,
    pub mean_dbm: Option<f64>,
    pub sd_db: Option<f64>,
    pub coverage: f64,
}

impl RssWindow {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Advertisement indices k with `t0 <= k / rate < t1`.
fn advert_range(rate_hz: f64, t0: f64, t1: f64) -> std::ops::Range<u64> {
    let lo = (t0 * rate_hz - TIME_EPS).ceil().max(0.0) as u64;
    let hi = (t1 * rate_hz - TIME_EPS).ceil().max(0.0) as u64;
    lo..hi.max(lo)
}

/// Every advertisement heard in `[from_s, to_s)` with the player held at
/// `player`, ordered by time and then by beacon order in the world. All
/// beacons in the world are stepped so their noise streams stay aligned.
pub fn tick(
    world: &World,
    model: &SignalModel,
    env: &mut PhysicalEnv,
    player: &PlayerState,
    from_s: f64,
    to_s: f64,
) -> Vec<RssSample> {
    let mut adverts: Vec<(f64, usize)> = Vec::new();
    for (i, b) in world.beacons.iter().enumerate() {
        for k in advert_range(b.adv_rate_hz, from_s, to_s) {
            adverts.push((k as f64 / b.adv_rate_hz, i));
        }
    }
    adverts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // the player does not move during a tick, so each beacon's mean is fixed
    let means: Vec<Option<f64>> =
        world.beacons.iter().map(|b| mean_rss(world, &model.propagation, b, player)).collect();
    adverts
        .into_iter()
        .filter_map(|(t, i)| env.sample_with_mean(world, model, i, player, means[i], t))
        .collect()
}

fn in_window(t: f64, t_start: f64, t_end: f64) -> bool {
    t >= t_start - TIME_EPS && t < t_end - TIME_EPS
}

/// Statistics for `beacon_id` over `[t_start, t_end)`. Samples of other
/// beacons are ignored.
pub fn window_stats(samples: &[RssSample], beacon_id: &str, t_start: f64, t_end: f64, expected: usize) -> RssWindow {
    window_from(samples.iter(), beacon_id, t_start, t_end, expected)
}

fn window_from<'a>(
    samples: impl Iterator<Item = &'a RssSample>,
    beacon_id: &str,
    t_start: f64,
    t_end: f64,
    expected: usize,
) -> RssWindow {
    let values: Vec<f64> = samples
        .filter(|s| s.beacon_id == beacon_id && in_window(s.timestamp_s, t_start, t_end))
        .map(|s| s.rssi_dbm)
        .collect();
    let n = values.len();
    let (mean, sd) = if n == 0 {
        (None, None)
    } else {
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        (Some(mean), Some(var.sqrt()))
    };
    let coverage = if expected == 0 { 0.0 } else { (n as f64 / expected as f64).min(1.0) };
    RssWindow {
        beacon_id: beacon_id.to_string(),
        t_start_s: t_start,
        t_end_s: t_end,
        n,
        expected,
        mean_dbm: mean,
        sd_db: sd,
        coverage,
    }
}

/// Windows of `config.window_span_s` stepping by `config.window_step_s`
/// across `[start_s, end_s)`; only whole windows are returned.
pub fn sliding_windows(
    samples: &[RssSample],
    beacon_id: &str,
    start_s: f64,
    end_s: f64,
    config: &ScanConfig,
    rate_hz: f64,
) -> Vec<RssWindow> {
    let expected = config.expected_samples(rate_hz);
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let t0 = start_s + f64::from(k) * config.window_step_s;
        let t1 = t0 + config.window_span_s;
        if t1 > end_s + TIME_EPS {
            break;
        }
        out.push(window_stats(samples, beacon_id, t0, t1, expected));
        k += 1;
    }
    out
}

/// Beacon with the highest mean among non-empty windows; ties go to the
/// lexicographically smallest id.
pub fn strongest_beacon(windows: &[RssWindow]) -> Option<String> {
    windows
        .iter()
        .filter_map(|w| w.mean_dbm.map(|m| (m, &w.beacon_id)))
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)))
        .map(|(_, id)| id.clone())
}

/// Recent samples, pruned to a horizon.
#[derive(Debug, Clone, Default)]
pub struct SampleBuffer {
    samples: VecDeque<RssSample>,
}

impl SampleBuffer {
    pub fn extend(&mut self, samples: impl IntoIterator<Item = RssSample>) {
        self.samples.extend(samples);
    }

    pub fn prune_before(&mut self, t_s: f64) {
        while self.samples.front().is_some_and(|s| s.timestamp_s < t_s - TIME_EPS) {
            self.samples.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RssSample> {
        self.samples.iter()
    }

    /// Window ending at `t_end_s` for one beacon.
    pub fn window(&self, beacon_id: &str, t_end_s: f64, config: &ScanConfig, rate_hz: f64) -> RssWindow {
        let t0 = t_end_s - config.window_span_s;
        window_from(self.samples.iter(), beacon_id, t0, t_end_s, config.expected_samples(rate_hz))
    }
}
