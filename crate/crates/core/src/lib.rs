//! Simulation engine for BLE-beacon driven, seamful location-based games.
//!
//! The crate is organised bottom-up:
//!
//! * [`world`] holds grid venues, beacons, artifacts and player motion.
//! * [`rf`] produces per-advertisement RSS readings, either from a
//!   parametric path-loss model or by replaying a measured fingerprint grid.
//! * [`scanner`] turns advertisements into samples and windowed statistics.
//! * [`feedback`] maps windows onto ghost feedback, floor switching and
//!   popup/realtime notification delivery.
//! * [`quest`] is the game state machine.
//! * [`harness`] runs agents through episodes and compares guidance paradigms.
//! * [`session`] is the transport-agnostic session protocol used by the server.

pub mod feedback;
pub mod harness;
pub mod quest;
pub mod rf;
pub mod rng;
pub mod scanner;
pub mod session;
pub mod world;

pub use feedback::{
    FeedbackCategory, FeedbackEvent, FeedbackThresholds, MessageTable, NotificationMode,
    NotificationQueue, SeamStrategy,
};
pub use harness::{Agent, ComparisonReport, EpisodeConfig, EpisodeReport};
pub use quest::{GameSession, Quest, QuestState, Quiz};
pub use rf::{CrowdConfig, FingerprintGrid, PropagationConfig, RssSample};
pub use rng::RngStream;
pub use scanner::{RssWindow, ScanConfig};
pub use world::{
    Beacon, BeaconRole, Cell, Floor, MoveCommand, Orientation, PlayerState, Venue, World,
};

/// Directory holding the fixtures shipped with the repository.
pub fn default_fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
