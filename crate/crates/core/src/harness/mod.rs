//! Agents, episodes and the seamful/seamless comparison.

mod compare;
mod localize;
mod route;

use serde::Serialize;
use thiserror::Error;

use crate::feedback::{
    FeedbackCategory, FeedbackError, FeedbackEvent, FeedbackPipeline, FeedbackThresholds, MessageTable,
    NotificationMode, NotificationQueue, SeamStrategy, Target,
};
use crate::rf::{survey_grid, EnvTrace, FingerprintGrid, PhysicalEnv, PropagationConfig, SignalModel};
use crate::rng::{streams, RngStream};
use crate::scanner::{tick, RssWindow, SampleBuffer, ScanConfig};
use crate::world::{move_player, Cell, FloorCell, MotionConfig, MoveCommand, Orientation, PlayerState, World};

pub use compare::{compare_paradigms, ComparisonCell, ComparisonReport, CrowdLevel, Sweep};
pub use localize::{fingerprint_localize, LocationEstimate};
pub use route::{measurement_route, shortest_path};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown artifact {0:?}")]
    UnknownArtifact(String),
    #[error("world has no artifacts")]
    NoArtifact,
    #[error("start state is not an open cell")]
    BadStart,
    #[error("step budget must be positive")]
    ZeroBudget,
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    /// Hot-and-cold follower of the ghost's feedback.
    GreedyFollower,
    RandomWalker,
    ScriptedWalk(Vec<MoveCommand>),
    /// Localizes by fingerprint matching and walks the shortest path from the
    /// estimate to the target. Used as the seamless baseline.
    SeamlessNavigator { grids: Vec<FingerprintGrid> },
}

impl Agent {
    /// Seamless navigator for `venue`, using measured grids where the model
    /// replays one and a noise-free survey of the parametric model elsewhere.
    pub fn seamless(world: &World, model: &SignalModel, venue: &str) -> Agent {
        let grids = world
            .beacons_in(venue)
            .map(|b| model.replay.get(&b.id).cloned().unwrap_or_else(|| survey_grid(world, &model.propagation, b)))
            .collect();
        Agent::SeamlessNavigator { grids }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Agent::GreedyFollower => "greedy",
            Agent::RandomWalker => "random",
            Agent::ScriptedWalk(_) => "scripted",
            Agent::SeamlessNavigator { .. } => "seamless",
        }
    }
}

/// Hot-and-cold rule on the most recent feedback: Farther or Lost turns
/// clockwise and steps; anything else, or no feedback, keeps walking straight.
pub fn greedy_policy(history: &[FeedbackEvent], orientation: Orientation) -> MoveCommand {
    match history.last().map(|e| e.category) {
        Some(FeedbackCategory::Farther | FeedbackCategory::Lost) => MoveCommand::Step(orientation.clockwise()),
        _ => MoveCommand::Step(orientation),
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub signal: SignalModel,
    pub thresholds: FeedbackThresholds,
    pub scan: ScanConfig,
    pub strategy: SeamStrategy,
    pub messages: MessageTable,
    /// Artifact to look for; the first artifact of the world when absent.
    pub target_artifact: Option<String>,
    /// Start pose; the target venue's entrance facing north when absent.
    pub start: Option<PlayerState>,
    pub stop_on_found: bool,
    pub record_env_trace: bool,
    /// Delay before the simulated player acknowledges a vibrating popup.
    pub ack_reaction_s: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            signal: SignalModel::parametric(PropagationConfig::default()),
            thresholds: FeedbackThresholds::default(),
            scan: ScanConfig::default(),
            strategy: SeamStrategy::default(),
            messages: MessageTable::default(),
            target_artifact: None,
            start: None,
            stop_on_found: true,
            record_env_trace: false,
            ack_reaction_s: 10.0,
        }
    }
}

impl EpisodeConfig {
    pub fn deterministic() -> Self {
        Self { signal: SignalModel::parametric(PropagationConfig::deterministic()), ..Self::default() }
    }
}

/// One scan window as the episode saw it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationRecord {
    pub t_end_s: f64,
    pub floor: u32,
    pub cell: Cell,
    pub orientation: Orientation,
    /// Command that led to this pose; absent for the initial window.
    pub command: Option<MoveCommand>,
    pub blocked: bool,
    pub active_floor: u32,
    pub category: Option<FeedbackCategory>,
    pub window: Option<RssWindow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeReport {
    pub seed: u64,
    pub agent: String,
    /// Step commands issued, blocked ones included.
    pub steps_taken: u32,
    pub commands: u32,
    pub found: bool,
    pub time_to_find_s: Option<f64>,
    pub duration_s: f64,
    /// Share of Closer/Farther events whose direction matches the change in
    /// true distance since the previous window; 1 when there were none.
    pub feedback_truth_agreement: f64,
    pub trend_events: u32,
    pub blackout_count: u32,
    pub events: Vec<FeedbackEvent>,
    pub observations: Vec<ObservationRecord>,
    pub localization_errors_m: Vec<f64>,
    pub estimates_absent: u32,
    pub realtime_deliveries: u32,
    pub popup_deliveries: u32,
    #[serde(skip)]
    pub env_trace: Option<EnvTrace>,
}

/// Events a player would see in popup mode if they acknowledge each popup
/// `reaction_s` after it starts vibrating, up to `end_s`.
pub fn popup_deliveries(events: &[FeedbackEvent], end_s: f64, reaction_s: f64) -> u32 {
    let mut queue = NotificationQueue::new(NotificationMode::Popup);
    let mut next_ack: Option<f64> = None;
    let mut delivered = 0;
    let mut drain = |queue: &mut NotificationQueue, next_ack: &mut Option<f64>, until: f64| {
        while let Some(t) = next_ack.filter(|t| *t <= until) {
            if queue.acknowledge().is_ok() {
                delivered += 1;
            }
            *next_ack = queue.vibration_active.then_some(t + reaction_s);
        }
    };
    for e in events {
        drain(&mut queue, &mut next_ack, e.timestamp_s);
        queue.notify(e.clone());
        if next_ack.is_none() {
            next_ack = Some(e.timestamp_s + reaction_s);
        }
    }
    drain(&mut queue, &mut next_ack, end_s);
    delivered
}

struct Scanner<'a> {
    world: &'a World,
    config: &'a EpisodeConfig,
    env: PhysicalEnv,
    buffer: SampleBuffer,
    pipeline: FeedbackPipeline,
    scanned_to: f64,
}

impl Scanner<'_> {
    /// Scans up to the player's clock and runs the feedback pipeline.
    fn observe(&mut self, player: &PlayerState, target: Target<'_>) -> Result<crate::feedback::PipelineOutput, FeedbackError> {
        let samples = tick(self.world, &self.config.signal, &mut self.env, player, self.scanned_to, player.clock_s);
        self.scanned_to = player.clock_s;
        self.buffer.extend(samples);
        self.buffer.prune_before(player.clock_s - self.config.scan.window_span_s);
        self.pipeline.process(self.world, &self.buffer, player, Some(target), player.clock_s)
    }
}

/// Runs one agent against one artifact. Each command is followed by a full
/// scan window at the new pose, so the clock advances by the window span per
/// command. The episode ends on Found (when configured), when `step_budget`
/// step commands have been issued, or when a script runs out.
pub fn run_episode(
    world: &World,
    agent: &Agent,
    config: &EpisodeConfig,
    seed: u64,
    step_budget: u32,
) -> Result<EpisodeReport, HarnessError> {
    if step_budget == 0 {
        return Err(HarnessError::ZeroBudget);
    }
    let artifact = match &config.target_artifact {
        Some(id) => world.artifact(id).ok_or_else(|| HarnessError::UnknownArtifact(id.clone()))?,
        None => world.artifacts.first().ok_or(HarnessError::NoArtifact)?,
    };
    let beacon = world.beacon(&artifact.beacon_id).ok_or_else(|| HarnessError::UnknownArtifact(artifact.id.clone()))?;
    let target = Target { ghost_id: &artifact.id, beacon_id: &beacon.id };
    let mut player = match &config.start {
        Some(p) => p.clone(),
        None => PlayerState::at_entrance(world, &artifact.venue, Orientation::N).ok_or(HarnessError::BadStart)?,
    };
    if !player.is_valid(world) {
        return Err(HarnessError::BadStart);
    }

    let dwell = config.scan.window_span_s;
    let motion = MotionConfig { step_duration_s: dwell };
    let mut env = PhysicalEnv::new(world, seed);
    if config.record_env_trace {
        env = env.with_trace();
    }
    let pipeline = FeedbackPipeline::new(
        world,
        config.thresholds,
        config.scan,
        config.strategy,
        config.messages.clone(),
        player.floor,
    );
    let mut scanner = Scanner { world, config, env, buffer: SampleBuffer::default(), pipeline, scanned_to: player.clock_s };
    let mut agent_rng = RngStream::derive(seed, streams::AGENT);

    let mut report = EpisodeReport {
        seed,
        agent: agent.name().to_string(),
        steps_taken: 0,
        commands: 0,
        found: false,
        time_to_find_s: None,
        duration_s: 0.0,
        feedback_truth_agreement: 1.0,
        trend_events: 0,
        blackout_count: 0,
        events: Vec::new(),
        observations: Vec::new(),
        localization_errors_m: Vec::new(),
        estimates_absent: 0,
        realtime_deliveries: 0,
        popup_deliveries: 0,
        env_trace: None,
    };
    let mut agreeing = 0u32;
    let target_pos = beacon.position();
    let distance = |p: &PlayerState| world.distance_m(p.cell, target_pos.cell);
    let start_clock = player.clock_s;

    player.clock_s += dwell;
    let mut command: Option<MoveCommand> = None;
    let mut blocked = false;
    let mut prev_distance = distance(&player);
    let max_commands = step_budget.saturating_mul(4).saturating_add(match agent {
        Agent::ScriptedWalk(c) => c.len() as u32,
        _ => 0,
    });

    loop {
        let out = scanner.observe(&player, target)?;
        let d = distance(&player);
        for e in &out.events {
            match e.category {
                FeedbackCategory::Closer | FeedbackCategory::Farther => {
                    report.trend_events += 1;
                    let truth_closer = d < prev_distance;
                    let truth_farther = d > prev_distance;
                    if (e.category == FeedbackCategory::Closer && truth_closer)
                        || (e.category == FeedbackCategory::Farther && truth_farther)
                    {
                        agreeing += 1;
                    }
                }
                FeedbackCategory::Blackout => report.blackout_count += 1,
                _ => {}
            }
        }
        prev_distance = d;
        let category = out.observation.as_ref().map(|o| o.category);
        report.observations.push(ObservationRecord {
            t_end_s: player.clock_s,
            floor: player.floor,
            cell: player.cell,
            orientation: player.orientation,
            command,
            blocked,
            active_floor: scanner.pipeline.active_floor(),
            category,
            window: out.observation.as_ref().map(|o| o.window.clone()),
        });
        report.events.extend(out.events.iter().cloned());
        if category == Some(FeedbackCategory::Found) && !report.found {
            report.found = true;
            report.time_to_find_s = Some(player.clock_s - start_clock);
            if config.stop_on_found {
                break;
            }
        }
        if report.steps_taken >= step_budget || report.commands >= max_commands {
            break;
        }

        let next = match agent {
            Agent::GreedyFollower if blocked => MoveCommand::Step(player.orientation.clockwise()),
            Agent::GreedyFollower => greedy_policy(&out.events, player.orientation),
            Agent::RandomWalker => MoveCommand::Step(Orientation::ALL[agent_rng.below(4)]),
            Agent::ScriptedWalk(script) => match script.get(report.commands as usize) {
                Some(c) => *c,
                None => break,
            },
            Agent::SeamlessNavigator { grids } => {
                let estimate = fingerprint_localize(&out.windows, grids, player.orientation);
                match estimate {
                    Some(e) => report.localization_errors_m.push(e.error_m(world, player.position())),
                    None => report.estimates_absent += 1,
                }
                seamless_step(world, &player, estimate, target_pos)
            }
        };
        let outcome = match move_player(world, &motion, &player, next) {
            Ok(o) => o,
            Err(e) => {
                tracing::debug!(error = %e, "command rejected");
                let mut state = player.clone();
                state.clock_s += dwell;
                crate::world::MoveOutcome { state, blocked: true }
            }
        };
        report.commands += 1;
        if matches!(next, MoveCommand::Step(_)) {
            report.steps_taken += 1;
        }
        player = outcome.state;
        blocked = outcome.blocked;
        command = Some(next);
    }

    report.duration_s = player.clock_s - start_clock;
    if report.trend_events > 0 {
        report.feedback_truth_agreement = f64::from(agreeing) / f64::from(report.trend_events);
    }
    report.realtime_deliveries = report.events.len() as u32;
    report.popup_deliveries = popup_deliveries(&report.events, player.clock_s, config.ack_reaction_s);
    report.env_trace = scanner.env.trace().cloned();
    Ok(report)
}

/// Seamless guidance: follow the shortest path from the estimated cell to the
/// target; wait in place without an estimate, look around when the estimate
/// already sits on the target.
fn seamless_step(world: &World, player: &PlayerState, estimate: Option<LocationEstimate>, target: FloorCell) -> MoveCommand {
    let Some(est) = estimate else { return MoveCommand::Turn(player.orientation) };
    let Some(floor) = world.floor(&player.venue, player.floor) else { return MoveCommand::Turn(player.orientation) };
    if est.at.floor != target.floor || est.at.cell == target.cell {
        return MoveCommand::Turn(player.orientation.clockwise());
    }
    match shortest_path(floor, est.at.cell, target.cell).and_then(|p| p.first().copied()) {
        Some(d) => MoveCommand::Step(d),
        None => MoveCommand::Turn(player.orientation.clockwise()),
    }
}

/// Runs `seeds` in parallel; reports come back in seed order.
pub fn run_batch(
    world: &World,
    agent: &Agent,
    config: &EpisodeConfig,
    seeds: &[u64],
    step_budget: u32,
) -> Result<Vec<EpisodeReport>, HarnessError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter().map(|&s| run_episode(world, agent, config, s, step_budget)).collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(seeds.len());
        for h in handles {
            out.extend(h.join().expect("episode worker panicked")?);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::Emotion;

    fn ev(c: FeedbackCategory, t: f64) -> FeedbackEvent {
        FeedbackEvent { category: c, ghost_id: "g".into(), message: "m".into(), emotion: Emotion::Neutral, uncertainty_note: None, timestamp_s: t }
    }

    #[test]
    fn policy_rules() {
        use FeedbackCategory::*;
        let o = Orientation::N;
        assert_eq!(greedy_policy(&[ev(Closer, 0.0)], o), MoveCommand::Step(o));
        assert_eq!(greedy_policy(&[ev(Farther, 0.0)], o), MoveCommand::Step(Orientation::E));
        assert_eq!(greedy_policy(&[ev(Lost, 0.0)], o), MoveCommand::Step(Orientation::E));
        assert_eq!(greedy_policy(&[ev(Blackout, 0.0)], o), MoveCommand::Step(o));
        assert_eq!(greedy_policy(&[ev(Steady, 0.0)], o), MoveCommand::Step(o));
        assert_eq!(greedy_policy(&[], o), MoveCommand::Step(o));
    }

    #[test]
    fn closer_closer_farther_is_one_turn() {
        use FeedbackCategory::*;
        let history = [ev(Closer, 5.0), ev(Closer, 10.0), ev(Farther, 15.0)];
        let mut o = Orientation::N;
        let mut turns = 0;
        for k in 1..=history.len() {
            let MoveCommand::Step(d) = greedy_policy(&history[..k], o) else { panic!() };
            turns += u32::from(d != o);
            o = d;
        }
        assert_eq!(turns, 1);
        assert_eq!(o, Orientation::E);
    }

    #[test]
    fn popup_accounting() {
        let events: Vec<_> = (1..=6).map(|k| ev(FeedbackCategory::Steady, 5.0 * f64::from(k))).collect();
        // acks at 15, 25 and 35 fall within the 35 s episode
        assert_eq!(popup_deliveries(&events, 35.0, 10.0), 3);
        assert_eq!(popup_deliveries(&events[..1], 5.0, 10.0), 0);
        assert_eq!(popup_deliveries(&[], 5.0, 10.0), 0);
    }

    #[test]
    fn greedy_finds_corner_beacon() {
        let w = World::open_room(10, 10, Cell::new(9, 9)).unwrap();
        let cfg = EpisodeConfig {
            start: Some(PlayerState { venue: "room".into(), floor: 0, cell: Cell::new(0, 0), orientation: Orientation::N, clock_s: 0.0, transit_to: None }),
            ..EpisodeConfig::deterministic()
        };
        let r = run_episode(&w, &Agent::GreedyFollower, &cfg, 1, 80).unwrap();
        assert!(r.found);
        assert_eq!(r.feedback_truth_agreement, 1.0);
        assert!(r.steps_taken <= 80);
    }

    #[test]
    fn episodes_are_reproducible() {
        let w = World::open_room(10, 10, Cell::new(7, 7)).unwrap();
        let cfg = EpisodeConfig::default();
        let a = run_episode(&w, &Agent::RandomWalker, &cfg, 9, 30).unwrap();
        let b = run_episode(&w, &Agent::RandomWalker, &cfg, 9, 30).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
