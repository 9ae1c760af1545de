//! Transport-agnostic session protocol.
//!
//! Clients send [`SessionCommand`]s and receive [`Envelope`]s. Every command
//! for an existing session ends with a snapshot, and each session numbers its
//! envelopes 1, 2, 3, ... without gaps. Envelopes that belong to no session
//! (a failed create, an unknown session id) carry sequence 0.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::feedback::{
    Delivery, FeedbackPipeline, FeedbackThresholds, MessageTable, NotificationMode, NotificationQueue, SeamStrategy,
    Target,
};
use crate::quest::{GameSession, QuestEvent, QuestState};
use crate::rf::{PhysicalEnv, PropagationConfig, SignalModel};
use crate::scanner::{tick, SampleBuffer, ScanConfig};
use crate::world::{
    load_world_file, move_player, BeaconRole, Cell, MotionConfig, MoveCommand, ObstacleKind, Orientation, PlayerState,
    Stairway, World,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateParams {
    /// Name of a world file in the fixture directory, without `.json`.
    pub world: String,
    /// Starting venue; the world's first venue when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default)]
    pub mode: NotificationMode,
    pub seed: u64,
    #[serde(default)]
    pub strategy: SeamStrategy,
    /// Noise-free, crowd-free propagation.
    #[serde(default)]
    pub deterministic: bool,
    /// Include beacon positions in snapshots.
    #[serde(default)]
    pub debug: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionCommand {
    Create(CreateParams),
    Move { session_id: String, command: MoveRequest },
    Acknowledge { session_id: String },
    Answer { session_id: String, quest_id: String, choice: usize },
    Snapshot { session_id: String },
}

/// The `command` of a move. Transit names its destination venue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum MoveRequest {
    Step { dir: Orientation },
    Turn { dir: Orientation },
    TakeStairs,
    Transit { to_venue: String },
    Arrive,
}

impl SessionCommand {
    pub fn session_id(&self) -> Option<&str> {
        match self {
            SessionCommand::Create(_) => None,
            SessionCommand::Move { session_id, .. }
            | SessionCommand::Acknowledge { session_id }
            | SessionCommand::Answer { session_id, .. }
            | SessionCommand::Snapshot { session_id } => Some(session_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedCommand,
    UnknownSession,
    UnknownWorld,
    InvalidMove,
    QuestError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleView {
    pub x: i32,
    pub y: i32,
    pub kind: ObstacleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorView {
    pub index: u32,
    pub width: u32,
    pub height: u32,
    pub obstacles: Vec<ObstacleView>,
    pub stairways: Vec<Stairway>,
}

/// Layout of the current venue. Carries no beacon or artifact positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueView {
    pub id: String,
    pub name: String,
    pub neighbors: Vec<String>,
    pub floors: Vec<FloorView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestView {
    pub id: String,
    pub ghost_name: String,
    pub artifact_name: String,
    pub venue: String,
    pub state: QuestState,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationView {
    pub mode: NotificationMode,
    pub pending: usize,
    pub vibration_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconView {
    pub id: String,
    pub floor: u32,
    pub x: i32,
    pub y: i32,
    pub role: BeaconRole,
    /// Artifact the beacon is attached to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugView {
    pub beacons: Vec<BeaconView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub world: String,
    pub seed: u64,
    pub strategy: SeamStrategy,
    pub clock_s: f64,
    pub player: PlayerState,
    pub active_floor: u32,
    /// The last step walked into an obstacle or the edge of the floor.
    pub last_move_blocked: bool,
    /// Absent while in transit.
    pub venue: Option<VenueView>,
    pub quests: Vec<QuestView>,
    pub active_quest: Option<String>,
    pub achievements: Vec<String>,
    pub notification: NotificationView,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debug: Option<DebugView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    /// A ghost message shown to the player.
    Feedback(Delivery),
    /// A popup was queued and the phone is vibrating.
    Popup { pending: usize },
    Quest(QuestEvent),
    Warning { message: String },
    Error { code: ErrorCode, message: String },
    Snapshot(Box<Snapshot>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub session_id: String,
    pub sequence: u64,
    pub payload: Payload,
}

impl Envelope {
    fn orphan(session_id: &str, code: ErrorCode, message: String) -> Self {
        Envelope { session_id: session_id.to_string(), sequence: 0, payload: Payload::Error { code, message } }
    }
}

/// One player's game: quest state, physical randomness, scanner and
/// notification queue, plus the envelope log.
pub struct Session {
    id: String,
    world_ref: String,
    world: Arc<World>,
    params: CreateParams,
    game: GameSession,
    model: SignalModel,
    env: PhysicalEnv,
    buffer: SampleBuffer,
    pipeline: FeedbackPipeline,
    queue: NotificationQueue,
    scan: ScanConfig,
    scanned_to: f64,
    last_blocked: bool,
    log: Vec<Envelope>,
}

impl Session {
    fn new(id: String, world: Arc<World>, params: CreateParams) -> Result<Self, String> {
        if let Some(v) = &params.venue {
            if world.venue(v).is_none() {
                return Err(format!("unknown venue {v:?}"));
            }
        }
        let game = GameSession::new(&world, params.venue.as_deref(), params.seed).ok_or("world has no venues")?;
        let propagation =
            if params.deterministic { PropagationConfig::deterministic() } else { PropagationConfig::default() };
        let scan = ScanConfig::default();
        let pipeline = FeedbackPipeline::new(
            &world,
            FeedbackThresholds::default(),
            scan,
            params.strategy,
            MessageTable::default(),
            game.player.floor,
        );
        Ok(Session {
            id,
            world_ref: params.world.clone(),
            env: PhysicalEnv::new(&world, params.seed),
            queue: NotificationQueue::new(params.mode),
            scanned_to: game.player.clock_s,
            world,
            params,
            game,
            model: SignalModel::parametric(propagation),
            buffer: SampleBuffer::default(),
            pipeline,
            scan,
            last_blocked: false,
            log: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Every envelope emitted so far, in sequence order.
    pub fn log(&self) -> &[Envelope] {
        &self.log
    }

    /// Envelopes with a sequence number above `after`.
    pub fn since(&self, after: u64) -> &[Envelope] {
        let start = usize::try_from(after).unwrap_or(usize::MAX).min(self.log.len());
        &self.log[start..]
    }

    pub fn game(&self) -> &GameSession {
        &self.game
    }

    fn emit(&mut self, out: &mut Vec<Envelope>, payload: Payload) {
        let env = Envelope { session_id: self.id.clone(), sequence: self.log.len() as u64 + 1, payload };
        self.log.push(env.clone());
        out.push(env);
    }

    fn error(&mut self, out: &mut Vec<Envelope>, code: ErrorCode, message: impl Into<String>) {
        self.emit(out, Payload::Error { code, message: message.into() });
    }

    pub fn snapshot(&self) -> Snapshot {
        let world = &self.world;
        let player = &self.game.player;
        let venue = (!player.in_transit()).then(|| world.venue(&player.venue)).flatten().map(|v| VenueView {
            id: v.id.clone(),
            name: v.name.clone(),
            neighbors: v.neighbors.clone(),
            floors: v
                .floors
                .iter()
                .map(|f| FloorView {
                    index: f.index,
                    width: f.width,
                    height: f.height,
                    obstacles: f.obstacles.iter().map(|(c, &kind)| ObstacleView { x: c.x, y: c.y, kind }).collect(),
                    stairways: f.stairways.clone(),
                })
                .collect(),
        });
        let debug = self.params.debug.then(|| DebugView {
            beacons: world
                .beacons
                .iter()
                .filter(|b| b.venue == player.venue)
                .map(|b| BeaconView {
                    id: b.id.clone(),
                    floor: b.floor,
                    x: b.cell.x,
                    y: b.cell.y,
                    role: b.role,
                    artifact: world.artifacts.iter().find(|a| a.beacon_id == b.id).map(|a| a.id.clone()),
                })
                .collect(),
        });
        Snapshot {
            world: self.world_ref.clone(),
            seed: self.params.seed,
            strategy: self.params.strategy,
            clock_s: player.clock_s,
            player: player.clone(),
            active_floor: self.pipeline.active_floor(),
            last_move_blocked: self.last_blocked,
            venue,
            quests: self
                .game
                .quests
                .iter()
                .map(|q| QuestView {
                    id: q.id.clone(),
                    ghost_name: q.ghost_name.clone(),
                    artifact_name: q.artifact_name.clone(),
                    venue: q.venue.clone(),
                    state: q.state,
                    attempts: q.quiz.attempts,
                })
                .collect(),
            active_quest: self.game.active().map(|q| q.id.clone()),
            achievements: self.game.achievements.clone(),
            notification: NotificationView {
                mode: self.queue.mode,
                pending: self.queue.pending.len(),
                vibration_active: self.queue.vibration_active,
            },
            debug,
        }
    }

    /// Applies one command and returns the envelopes it produced, ending with
    /// a snapshot. Commands naming another session are refused.
    pub fn handle(&mut self, command: &SessionCommand) -> Vec<Envelope> {
        let mut out = Vec::new();
        match command {
            SessionCommand::Create(_) => {
                self.error(&mut out, ErrorCode::MalformedCommand, "create cannot target an existing session")
            }
            SessionCommand::Move { command, .. } => self.handle_move(command, &mut out),
            SessionCommand::Acknowledge { .. } => match self.queue.acknowledge() {
                Ok(d) => self.emit(&mut out, Payload::Feedback(d)),
                Err(w) => self.emit(&mut out, Payload::Warning { message: w.to_string() }),
            },
            SessionCommand::Answer { quest_id, choice, .. } => {
                match self.game.answer_quiz(&self.world, quest_id, *choice) {
                    Ok(events) => events.into_iter().for_each(|e| self.emit(&mut out, Payload::Quest(e))),
                    Err(e) => self.error(&mut out, ErrorCode::QuestError, e.to_string()),
                }
            }
            SessionCommand::Snapshot { .. } => {}
        }
        let snap = Payload::Snapshot(Box::new(self.snapshot()));
        self.emit(&mut out, snap);
        out
    }

    fn handle_move(&mut self, request: &MoveRequest, out: &mut Vec<Envelope>) {
        let command = match request {
            MoveRequest::Step { dir } => MoveCommand::Step(*dir),
            MoveRequest::Turn { dir } => MoveCommand::Turn(*dir),
            MoveRequest::TakeStairs => MoveCommand::TakeStairs,
            MoveRequest::Transit { to_venue } => {
                match self.game.handoff(&self.world, to_venue) {
                    Ok(events) => {
                        self.buffer = SampleBuffer::default();
                        events.into_iter().for_each(|e| self.emit(out, Payload::Quest(e)));
                    }
                    Err(e) => self.error(out, ErrorCode::QuestError, e.to_string()),
                }
                return;
            }
            MoveRequest::Arrive => {
                match self.game.arrive(&self.world) {
                    Ok(events) => {
                        self.pipeline.reset_floor(self.game.player.floor);
                        self.scanned_to = self.game.player.clock_s;
                        self.last_blocked = false;
                        events.into_iter().for_each(|e| self.emit(out, Payload::Quest(e)));
                    }
                    Err(e) => self.error(out, ErrorCode::QuestError, e.to_string()),
                }
                return;
            }
        };
        // one full window at the new pose per command
        let motion = MotionConfig { step_duration_s: self.scan.window_span_s };
        let outcome = match move_player(&self.world, &motion, &self.game.player, command) {
            Ok(o) => o,
            Err(e) => return self.error(out, ErrorCode::InvalidMove, e.to_string()),
        };
        for e in self.game.start() {
            self.emit(out, Payload::Quest(e));
        }
        self.game.player = outcome.state;
        self.last_blocked = outcome.blocked;
        let player = self.game.player.clone();
        let samples = tick(&self.world, &self.model, &mut self.env, &player, self.scanned_to, player.clock_s);
        self.scanned_to = player.clock_s;
        self.buffer.extend(samples);
        self.buffer.prune_before(player.clock_s - self.scan.window_span_s);

        let target = self
            .game
            .active()
            .filter(|q| q.state == QuestState::Active)
            .map(|q| (q.ghost_id.clone(), q.target_beacon_id.clone()));
        let target = target.as_ref().map(|(g, b)| Target { ghost_id: g, beacon_id: b });
        let feedback = match self.pipeline.process(&self.world, &self.buffer, &player, target, player.clock_s) {
            Ok(o) => o.events,
            Err(e) => {
                tracing::error!(error = %e, "feedback pipeline failed");
                return self.error(out, ErrorCode::QuestError, e.to_string());
            }
        };
        for e in &feedback {
            match self.queue.notify(e.clone()) {
                Some(d) => self.emit(out, Payload::Feedback(d)),
                None => {
                    let pending = self.queue.pending.len();
                    self.emit(out, Payload::Popup { pending });
                }
            }
        }
        for e in self.game.advance(&feedback) {
            self.emit(out, Payload::Quest(e));
        }
    }
}

/// Resolves world names to loaded worlds, reading each file once.
pub struct WorldCatalog {
    dir: PathBuf,
    loaded: Mutex<BTreeMap<String, Arc<World>>>,
}

impl WorldCatalog {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), loaded: Mutex::new(BTreeMap::new()) }
    }

    /// Registers a world under `name` without touching the filesystem.
    pub fn insert(&self, name: &str, world: World) {
        lock(&self.loaded).insert(name.to_string(), Arc::new(world));
    }

    /// Only bare names are accepted so a client cannot read arbitrary paths.
    pub fn get(&self, name: &str) -> Result<Arc<World>, String> {
        if let Some(w) = lock(&self.loaded).get(name) {
            return Ok(w.clone());
        }
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(format!("bad world name {name:?}"));
        }
        let world = load_world_file(self.dir.join(format!("{name}.json"))).map_err(|e| format!("world {name:?}: {e}"))?;
        let world = Arc::new(world);
        lock(&self.loaded).insert(name.to_string(), world.clone());
        Ok(world)
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

type Sink = Box<dyn Fn(&[Envelope]) + Send + Sync>;

/// Holds many sessions. Commands for one session run one at a time in
/// arrival order; different sessions do not block each other.
pub struct SessionServer {
    catalog: WorldCatalog,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    next_id: Mutex<u64>,
    sink: Option<Sink>,
}

impl SessionServer {
    pub fn new(catalog: WorldCatalog) -> Self {
        Self { catalog, sessions: Mutex::new(BTreeMap::new()), next_id: Mutex::new(1), sink: None }
    }

    /// `sink` sees every session envelope while the session is still locked,
    /// so it observes them in sequence order.
    pub fn with_sink(mut self, sink: impl Fn(&[Envelope]) + Send + Sync + 'static) -> Self {
        self.sink = Some(Box::new(sink));
        self
    }

    pub fn catalog(&self) -> &WorldCatalog {
        &self.catalog
    }

    pub fn session_ids(&self) -> Vec<String> {
        lock(&self.sessions).keys().cloned().collect()
    }

    /// Runs `f` with the session locked; `None` for an unknown id.
    pub fn with_session<R>(&self, id: &str, f: impl FnOnce(&Session) -> R) -> Option<R> {
        let s = lock(&self.sessions).get(id).cloned()?;
        let guard = lock(&s);
        Some(f(&guard))
    }

    pub fn handle_command(&self, command: SessionCommand) -> Vec<Envelope> {
        match &command {
            SessionCommand::Create(params) => self.create(params.clone()),
            _ => {
                let id = command.session_id().unwrap_or_default();
                let Some(s) = lock(&self.sessions).get(id).cloned() else {
                    return vec![Envelope::orphan(id, ErrorCode::UnknownSession, format!("unknown session {id:?}"))];
                };
                let mut session = lock(&s);
                let out = session.handle(&command);
                self.publish(&out);
                out
            }
        }
    }

    /// Parses one JSON command. A malformed command naming a live session is
    /// answered in that session's sequence without changing its state.
    pub fn handle_line(&self, line: &str) -> Vec<Envelope> {
        match serde_json::from_str::<SessionCommand>(line) {
            Ok(c) => self.handle_command(c),
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("session_id")?.as_str().map(str::to_string));
                let message = format!("malformed command: {e}");
                let session = id.as_deref().and_then(|id| lock(&self.sessions).get(id).cloned());
                match session {
                    Some(s) => {
                        let mut session = lock(&s);
                        let mut out = Vec::new();
                        session.error(&mut out, ErrorCode::MalformedCommand, message);
                        self.publish(&out);
                        out
                    }
                    None => vec![Envelope::orphan(id.as_deref().unwrap_or(""), ErrorCode::MalformedCommand, message)],
                }
            }
        }
    }

    fn create(&self, params: CreateParams) -> Vec<Envelope> {
        let world = match self.catalog.get(&params.world) {
            Ok(w) => w,
            Err(e) => return vec![Envelope::orphan("", ErrorCode::UnknownWorld, e)],
        };
        let id = {
            let mut n = lock(&self.next_id);
            let id = format!("s{n}");
            *n += 1;
            id
        };
        let mut session = match Session::new(id.clone(), world, params) {
            Ok(s) => s,
            Err(e) => return vec![Envelope::orphan("", ErrorCode::UnknownWorld, e)],
        };
        let mut out = Vec::new();
        let snap = Payload::Snapshot(Box::new(session.snapshot()));
        session.emit(&mut out, snap);
        let session = Arc::new(Mutex::new(session));
        let guard = lock(&session);
        lock(&self.sessions).insert(id, session.clone());
        self.publish(&out);
        drop(guard);
        out
    }

    fn publish(&self, envelopes: &[Envelope]) {
        if let Some(sink) = &self.sink {
            sink(envelopes);
        }
    }
}

/// First direction of a straight-line walk from `from` to `to`, preferring
/// the longer axis. `None` when they coincide.
pub fn step_towards(from: Cell, to: Cell) -> Option<Orientation> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    match (dx.signum(), dy.signum()) {
        (0, 0) => None,
        _ if dx.abs() >= dy.abs() => Some(if dx > 0 { Orientation::E } else { Orientation::W }),
        _ => Some(if dy > 0 { Orientation::S } else { Orientation::N }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn server() -> SessionServer {
        SessionServer::new(WorldCatalog::new(crate::default_fixture_dir()))
    }

    fn create(s: &SessionServer, mode: NotificationMode, deterministic: bool) -> String {
        let out = s.handle_command(SessionCommand::Create(CreateParams {
            world: "cambridge".into(),
            venue: None,
            mode,
            seed: 7,
            strategy: SeamStrategy::Opportunistic,
            deterministic,
            debug: false,
        }));
        assert_eq!(out.len(), 1);
        out[0].session_id.clone()
    }

    fn mv(id: &str, command: MoveRequest) -> SessionCommand {
        SessionCommand::Move { session_id: id.into(), command }
    }

    fn last_snapshot(out: &[Envelope]) -> &Snapshot {
        match &out.last().unwrap().payload {
            Payload::Snapshot(s) => s,
            p => panic!("expected snapshot, got {p:?}"),
        }
    }

    #[test]
    fn create_then_snapshot() {
        let s = server();
        let id = create(&s, NotificationMode::Popup, true);
        assert_eq!(id, "s1");
        let out = s.handle_command(SessionCommand::Snapshot { session_id: id.clone() });
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].sequence, 2);
        let snap = last_snapshot(&out);
        assert_eq!(snap.player.cell, Cell::new(1, 1));
        assert!(snap.quests.iter().all(|q| q.state == QuestState::Pending));
        assert!(snap.debug.is_none());
    }

    #[test]
    fn unknown_session_and_malformed() {
        let s = server();
        let out = s.handle_command(SessionCommand::Snapshot { session_id: "s9".into() });
        assert!(matches!(out[0].payload, Payload::Error { code: ErrorCode::UnknownSession, .. }));
        assert_eq!(out[0].sequence, 0);

        let id = create(&s, NotificationMode::Popup, true);
        let before = s.with_session(&id, |x| x.snapshot()).unwrap();
        let out = s.handle_line(r#"{"type": "move", "session_id": "s1", "command": {"action": "fly"}}"#);
        assert_eq!(out.len(), 1);
        assert!(matches!(out[0].payload, Payload::Error { code: ErrorCode::MalformedCommand, .. }));
        assert_eq!(out[0].sequence, 2);
        assert_eq!(s.with_session(&id, |x| x.snapshot()).unwrap(), before);
        let out = s.handle_line("not json");
        assert_eq!((out[0].sequence, out[0].session_id.as_str()), (0, ""));
    }

    #[test]
    fn empty_ack_warns_without_change() {
        let s = server();
        let id = create(&s, NotificationMode::Popup, true);
        let before = s.with_session(&id, |x| x.snapshot()).unwrap();
        let out = s.handle_command(SessionCommand::Acknowledge { session_id: id.clone() });
        assert!(matches!(out[0].payload, Payload::Warning { .. }));
        assert_eq!(last_snapshot(&out), &before);
    }

    #[test]
    fn popup_vibrates_until_acknowledged() {
        let s = server();
        let id = create(&s, NotificationMode::Popup, true);
        let out = s.handle_command(mv(&id, MoveRequest::Step { dir: Orientation::E }));
        assert!(out.iter().any(|e| matches!(e.payload, Payload::Quest(QuestEvent::QuestActivated { .. }))));
        let pending = last_snapshot(&out).notification.pending;
        assert!(pending > 0);
        assert!(last_snapshot(&out).notification.vibration_active);
        let mut out = Vec::new();
        for _ in 0..pending {
            out = s.handle_command(SessionCommand::Acknowledge { session_id: id.clone() });
            assert!(matches!(out[0].payload, Payload::Feedback(Delivery { vibrated: true, .. })));
        }
        assert!(!last_snapshot(&out).notification.vibration_active);
    }

    #[test]
    fn walking_to_target_finds_it() {
        let s = server();
        let id = create(&s, NotificationMode::Realtime, true);
        let w = s.catalog().get("cambridge").unwrap();
        let mut log = Vec::new();
        log.extend(s.handle_command(mv(&id, MoveRequest::Turn { dir: Orientation::N })));
        let quest = s.with_session(&id, |x| x.game().active().unwrap().clone()).unwrap();
        let target = w.beacon(&quest.target_beacon_id).unwrap().cell;
        for _ in 0..40 {
            let here = s.with_session(&id, |x| x.game().player.cell).unwrap();
            let Some(dir) = step_towards(here, target) else { break };
            let floor = w.floor(&quest.venue, 0).unwrap();
            let dir = if floor.is_open(here.offset(dir)) { dir } else { dir.clockwise() };
            log.extend(s.handle_command(mv(&id, MoveRequest::Step { dir })));
        }
        let closer = log.iter().any(|e| matches!(&e.payload, Payload::Feedback(d) if d.event.category == crate::FeedbackCategory::Closer));
        assert!(closer);
        let found = log.iter().any(|e| matches!(e.payload, Payload::Quest(QuestEvent::ArtifactFound { .. })));
        assert!(found);
        let seqs: Vec<u64> = log.iter().map(|e| e.sequence).collect();
        assert!(seqs.windows(2).all(|p| p[1] == p[0] + 1));
    }

    #[test]
    fn debug_snapshot_lists_beacons() {
        let s = server();
        let out = s.handle_command(SessionCommand::Create(CreateParams {
            world: "cambridge".into(),
            venue: Some("maa".into()),
            mode: NotificationMode::Popup,
            seed: 1,
            strategy: SeamStrategy::Cautious,
            deterministic: false,
            debug: true,
        }));
        let snap = last_snapshot(&out);
        assert_eq!(snap.player.venue, "maa");
        assert!(!snap.debug.as_ref().unwrap().beacons.is_empty());
    }

    #[test]
    fn bad_world_names() {
        let s = server();
        for name in ["../etc/passwd", "nope", ""] {
            let out = s.handle_line(&format!(r#"{{"type": "create", "world": "{name}", "seed": 1}}"#));
            assert!(matches!(out[0].payload, Payload::Error { code: ErrorCode::UnknownWorld, .. }), "{name}");
        }
    }
}
