use std::fmt::Write as _;

use serde::Serialize;

use crate::rf::{CrowdConfig, SignalModel};
use crate::world::World;

use super::{run_batch, Agent, EpisodeConfig, EpisodeReport, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrowdLevel {
    pub label: String,
    pub config: CrowdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub noise_sigmas_db: Vec<f64>,
    pub crowds: Vec<CrowdLevel>,
}

impl Sweep {
    /// Three noise levels by three crowd levels.
    pub fn standard() -> Self {
        Self {
            noise_sigmas_db: vec![0.0, 3.2, 6.4],
            crowds: vec![
                CrowdLevel { label: "none".into(), config: CrowdConfig::none() },
                CrowdLevel { label: "default".into(), config: CrowdConfig::default() },
                CrowdLevel {
                    label: "heavy".into(),
                    config: CrowdConfig { on_probability: 0.15, mean_dwell_s: 12.0, full_block_probability: 0.3, ..CrowdConfig::default() },
                },
            ],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.noise_sigmas_db.is_empty() || self.crowds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonCell {
    pub noise_sigma_db: f64,
    pub crowd: String,
    pub episodes: usize,
    pub seamful_success_rate: f64,
    pub seamful_median_steps: Option<f64>,
    pub seamless_success_rate: f64,
    pub seamless_median_steps: Option<f64>,
    pub seamless_median_error_m: Option<f64>,
    /// Share of seamless decisions made without any position estimate.
    pub seamless_absent_fraction: f64,
    pub realtime_events_per_min: f64,
    pub popup_events_per_min: f64,
    /// Every seed's two episodes saw the same physical randomness.
    pub traces_matched: bool,
    /// Popup delivered fewer events than realtime on every seamful trace.
    pub popup_below_realtime: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub world: String,
    pub seeds: Vec<u64>,
    pub step_budget: u32,
    pub cells: Vec<ComparisonCell>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}

fn rate(hits: usize, total: usize) -> f64 {
    if total == 0 { 0.0 } else { hits as f64 / total as f64 }
}

fn per_minute(counts: impl Iterator<Item = (u32, f64)>) -> f64 {
    let (n, secs) = counts.fold((0u64, 0.0), |(n, s), (c, d)| (n + u64::from(c), s + d));
    if secs == 0.0 { 0.0 } else { n as f64 * 60.0 / secs }
}

fn summarise(noise: f64, crowd: &str, seamful: &[EpisodeReport], seamless: &[EpisodeReport]) -> ComparisonCell {
    let found_steps = |rs: &[EpisodeReport]| median(rs.iter().filter(|r| r.found).map(|r| f64::from(r.steps_taken)).collect());
    let errors: Vec<f64> = seamless.iter().flat_map(|r| r.localization_errors_m.iter().copied()).collect();
    let absent: u32 = seamless.iter().map(|r| r.estimates_absent).sum();
    let decisions = errors.len() + absent as usize;
    let traces_matched = seamful.iter().zip(seamless).all(|(a, b)| match (&a.env_trace, &b.env_trace) {
        (Some(x), Some(y)) => x.agrees_with(y),
        _ => false,
    });
    ComparisonCell {
        noise_sigma_db: noise,
        crowd: crowd.to_string(),
        episodes: seamful.len(),
        seamful_success_rate: rate(seamful.iter().filter(|r| r.found).count(), seamful.len()),
        seamful_median_steps: found_steps(seamful),
        seamless_success_rate: rate(seamless.iter().filter(|r| r.found).count(), seamless.len()),
        seamless_median_steps: found_steps(seamless),
        seamless_median_error_m: median(errors),
        seamless_absent_fraction: rate(absent as usize, decisions),
        realtime_events_per_min: per_minute(seamful.iter().map(|r| (r.realtime_deliveries, r.duration_s))),
        popup_events_per_min: per_minute(seamful.iter().map(|r| (r.popup_deliveries, r.duration_s))),
        traces_matched,
        popup_below_realtime: seamful.iter().all(|r| r.popup_deliveries < r.realtime_deliveries),
    }
}

/// Runs the hot-and-cold follower and the seamless navigator on the same
/// seeds for every cell of the sweep.
pub fn compare_paradigms(
    world: &World,
    base: &EpisodeConfig,
    sweep: &Sweep,
    seeds: &[u64],
    step_budget: u32,
) -> Result<ComparisonReport, HarnessError> {
    let venue = match &base.target_artifact {
        Some(id) => world.artifact(id).ok_or_else(|| HarnessError::UnknownArtifact(id.clone()))?.venue.clone(),
        None => world.artifacts.first().ok_or(HarnessError::NoArtifact)?.venue.clone(),
    };
    let mut cells = Vec::new();
    for &noise in &sweep.noise_sigmas_db {
        for crowd in &sweep.crowds {
            let mut propagation = base.signal.propagation.clone();
            propagation.noise_sigma_db = noise;
            propagation.crowd = crowd.config.clone();
            propagation.deterministic = false;
            let config = EpisodeConfig {
                signal: SignalModel { propagation, replay: base.signal.replay.clone() },
                record_env_trace: true,
                ..base.clone()
            };
            let seamless_agent = Agent::seamless(world, &config.signal, &venue);
            let seamful = run_batch(world, &Agent::GreedyFollower, &config, seeds, step_budget)?;
            let seamless = run_batch(world, &seamless_agent, &config, seeds, step_budget)?;
            cells.push(summarise(noise, &crowd.label, &seamful, &seamless));
        }
    }
    let name = world.venue(&venue).map_or(venue.clone(), |v| v.name.clone());
    Ok(ComparisonReport { world: name, seeds: seeds.to_vec(), step_budget, cells })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "noise_sigma_db",
            "crowd",
            "episodes",
            "seamful_success_rate",
            "seamful_median_steps",
            "seamless_success_rate",
            "seamless_median_steps",
            "seamless_median_error_m",
            "seamless_absent_fraction",
            "realtime_events_per_min",
            "popup_events_per_min",
            "traces_matched",
        ])
        .expect("write to memory");
        for c in &self.cells {
            let field = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
            w.write_record([
                c.noise_sigma_db.to_string(),
                c.crowd.clone(),
                c.episodes.to_string(),
                c.seamful_success_rate.to_string(),
                field(c.seamful_median_steps),
                c.seamless_success_rate.to_string(),
                field(c.seamless_median_steps),
                field(c.seamless_median_error_m),
                c.seamless_absent_fraction.to_string(),
                c.realtime_events_per_min.to_string(),
                c.popup_events_per_min.to_string(),
                c.traces_matched.to_string(),
            ])
            .expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    pub fn to_text_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({} seeds, budget {} steps)", self.world, self.seeds.len(), self.step_budget);
        let _ = writeln!(
            s,
            "{:>7} {:>8} | {:>8} {:>7} | {:>8} {:>7} {:>7} {:>7} | {:>8} {:>8}",
            "noise", "crowd", "seamful", "steps", "seamless", "steps", "err_m", "absent", "rt/min", "popup/min"
        );
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:>7.1} {:>8} | {:>8.2} {:>7} | {:>8.2} {:>7} {:>7} {:>7.2} | {:>8.2} {:>8.2}",
                c.noise_sigma_db,
                c.crowd,
                c.seamful_success_rate,
                opt(c.seamful_median_steps),
                c.seamless_success_rate,
                opt(c.seamless_median_steps),
                opt(c.seamless_median_error_m),
                c.seamless_absent_fraction,
                c.realtime_events_per_min,
                c.popup_events_per_min,
            );
        }
        s
    }
}
