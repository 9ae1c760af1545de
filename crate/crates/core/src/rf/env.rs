use std::collections::BTreeMap;

use crate::rng::{streams, RngStream};
use crate::world::{PlayerState, World};

use super::config::PropagationConfig;
use super::crowd::{crowd_attenuation, CrowdAttenuation, CrowdState};
use super::fingerprint::{replay_with, FingerprintGrid, ReplayOutcome};
use super::model::{mean_rss, observe_rss};
use super::RssSample;

/// Chooses how each beacon's readings are produced. Beacons with a replay
/// grid use it; all others use the parametric model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalModel {
    pub propagation: PropagationConfig,
    pub replay: BTreeMap<String, FingerprintGrid>,
}

impl SignalModel {
    pub fn parametric(propagation: PropagationConfig) -> Self {
        Self { propagation, replay: BTreeMap::new() }
    }

    pub fn with_replay(mut self, grid: FingerprintGrid) -> Self {
        self.replay.insert(grid.beacon_id.clone(), grid);
        self
    }
}

/// Record of the random environment: crowd attenuation per elapsed second and
/// the normal deviate drawn for each advertisement of each beacon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvTrace {
    pub crowd: Vec<CrowdAttenuation>,
    pub noise: Vec<Vec<f64>>,
}

impl EnvTrace {
    /// True when the two traces agree on everything both of them recorded.
    pub fn agrees_with(&self, other: &EnvTrace) -> bool {
        let prefix = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        self.crowd.iter().zip(&other.crowd).all(|(a, b)| a == b)
            && self.noise.len() == other.noise.len()
            && self.noise.iter().zip(&other.noise).all(|(a, b)| prefix(a, b))
    }
}

/// Random state of one simulated session: the crowd process plus one noise
/// stream per beacon, all derived from a single seed.
#[derive(Debug, Clone)]
pub struct PhysicalEnv {
    crowd_state: CrowdState,
    crowd_rng: RngStream,
    beacon_rngs: Vec<RngStream>,
    trace: Option<EnvTrace>,
}

impl PhysicalEnv {
    pub fn new(world: &World, seed: u64) -> Self {
        Self {
            crowd_state: CrowdState::default(),
            crowd_rng: RngStream::derive(seed, streams::CROWD),
            beacon_rngs: (0..world.beacons.len())
                .map(|i| RngStream::derive(seed, streams::BEACON_BASE + i as u64))
                .collect(),
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(EnvTrace { crowd: Vec::new(), noise: vec![Vec::new(); self.beacon_rngs.len()] });
        self
    }

    pub fn trace(&self) -> Option<&EnvTrace> {
        self.trace.as_ref()
    }

    pub fn crowd_at(&mut self, model: &SignalModel, t_s: f64) -> CrowdAttenuation {
        if model.propagation.deterministic {
            return CrowdAttenuation::CLEAR;
        }
        let a = crowd_attenuation(&model.propagation.crowd, &mut self.crowd_state, t_s, &mut self.crowd_rng);
        if let Some(trace) = &mut self.trace {
            while (trace.crowd.len() as u64) < self.crowd_state.second {
                trace.crowd.push(self.crowd_state.current);
            }
        }
        a
    }

    /// One advertisement of beacon `beacon_index` at `t_s`. Calls must come in
    /// non-decreasing time order.
    pub fn sample(
        &mut self,
        world: &World,
        model: &SignalModel,
        beacon_index: usize,
        player: &PlayerState,
        t_s: f64,
    ) -> Option<RssSample> {
        let mean = mean_rss(world, &model.propagation, &world.beacons[beacon_index], player);
        self.sample_with_mean(world, model, beacon_index, player, mean, t_s)
    }

    /// As [`PhysicalEnv::sample`] with the pose-dependent mean supplied by the
    /// caller, which lets a scan reuse it across a stationary interval.
    pub fn sample_with_mean(
        &mut self,
        world: &World,
        model: &SignalModel,
        beacon_index: usize,
        player: &PlayerState,
        mean: Option<f64>,
        t_s: f64,
    ) -> Option<RssSample> {
        let config = &model.propagation;
        let crowd = self.crowd_at(model, t_s);
        let beacon = &world.beacons[beacon_index];
        let rng = &mut self.beacon_rngs[beacon_index];
        let z = if config.deterministic { 0.0 } else { rng.standard_normal() };
        if let Some(trace) = &mut self.trace {
            if !config.deterministic {
                trace.noise[beacon_index].push(z);
            }
        }
        match model.replay.get(&beacon.id) {
            None => observe_rss(config, mean, crowd, z)
                .map(|rssi_dbm| RssSample { beacon_id: beacon.id.clone(), timestamp_s: t_s, rssi_dbm }),
            Some(grid) => {
                let audible = !player.in_transit() && player.venue == beacon.venue && player.floor == beacon.floor;
                match replay_with(grid, player, z, t_s) {
                    ReplayOutcome::Sample(s) if audible => Some(s),
                    _ => None,
                }
            }
        }
    }
}
