//! Ghost feedback: trend classification, message rendering under the seam
//! strategies, floor switching and notification delivery.

mod floor;
mod messages;
mod notify;
mod pipeline;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scanner::RssWindow;
use crate::world::Orientation;

pub use floor::{floor_filter, update_active_floor, FilterDecision, FloorUpdate};
pub use messages::{MessageLine, MessageRenderer, MessageTable, RenderRequest};
pub use notify::{AckWarning, Delivery, NotificationMode, NotificationQueue};
pub use pipeline::{FeedbackPipeline, PipelineOutput, Target};

#[derive(Debug, Error, PartialEq)]
pub enum FeedbackError {
    #[error("unknown ghost {0:?}")]
    UnknownGhost(String),
    #[error("message table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackThresholds {
    pub trend_delta_db: f64,
    pub weak_mean_dbm: f64,
    pub high_sd_db: f64,
    pub blackout_windows: u32,
    pub lost_windows: u32,
    pub found_mean_dbm: f64,
    pub switch_mean_dbm: f64,
}

impl Default for FeedbackThresholds {
    fn default() -> Self {
        Self {
            trend_delta_db: 3.0,
            weak_mean_dbm: -88.0,
            high_sd_db: 6.0,
            blackout_windows: 1,
            lost_windows: 2,
            found_mean_dbm: -65.0,
            switch_mean_dbm: -70.0,
        }
    }
}

impl FeedbackThresholds {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
    pub fn validate(&self, detection_floor_dbm: f64) -> Result<(), String> {
        if !(self.found_mean_dbm > self.switch_mean_dbm
            && self.switch_mean_dbm > self.weak_mean_dbm
            && self.weak_mean_dbm > detection_floor_dbm)
        {
            return Err("thresholds must satisfy found > switch > weak > detection floor".into());
        }
        if !(self.trend_delta_db > 0.0) || self.high_sd_db < 0.0 {
            return Err("trend_delta_db must be positive and high_sd_db non-negative".into());
        }
        if self.blackout_windows == 0 || self.lost_windows == 0 {
            return Err("window counts must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackCategory {
    Closer,
    Farther,
    Steady,
    Lost,
    Blackout,
    Found,
    FloorSwitched,
}

impl FeedbackCategory {
    pub const ALL: [FeedbackCategory; 7] = [
        Self::Closer,
        Self::Farther,
        Self::Steady,
        Self::Lost,
        Self::Blackout,
        Self::Found,
        Self::FloorSwitched,
    ];

    pub fn is_trend(self) -> bool {
        matches!(self, Self::Closer | Self::Farther)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Happy,
    Angry,
    Neutral,
    Excited,
}

impl Emotion {
    /// Emotions a ghost may show for `category`.
    pub fn allowed_for(category: FeedbackCategory) -> &'static [Emotion] {
        use FeedbackCategory::*;
        match category {
            Closer | Found => &[Emotion::Happy, Emotion::Excited],
            Farther | Lost => &[Emotion::Angry],
            Steady | Blackout | FloorSwitched => &[Emotion::Happy, Emotion::Angry, Emotion::Neutral, Emotion::Excited],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeamStrategy {
    Pessimistic,
    Optimistic,
    Cautious,
    #[default]
    Opportunistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub category: FeedbackCategory,
    pub ghost_id: String,
    pub message: String,
    pub emotion: Emotion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty_note: Option<String>,
    pub timestamp_s: f64,
}

/// Streaks of windows immediately preceding the one being classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassifyHistory {
    pub empty_streak: u32,
    pub weak_streak: u32,
}

impl ClassifyHistory {
    /// History after observing `cur`.
    pub fn after(self, cur: &RssWindow, thresholds: &FeedbackThresholds) -> Self {
        Self {
            empty_streak: if cur.is_empty() { self.empty_streak + 1 } else { 0 },
            weak_streak: if is_weak(cur, thresholds) { self.weak_streak + 1 } else { 0 },
        }
    }
}

fn is_weak(w: &RssWindow, t: &FeedbackThresholds) -> bool {
    match (w.mean_dbm, w.sd_db) {
        (Some(m), sd) => m < t.weak_mean_dbm || sd.unwrap_or(0.0) > t.high_sd_db,
        (None, _) => false,
    }
}

/// Classifies `cur` against the reference window `prev`.
///
/// Precedence is Found, Blackout, Lost, then the trend. An empty window that
/// has not yet lasted `blackout_windows` reads as Steady.
pub fn classify(
    prev: Option<&RssWindow>,
    cur: &RssWindow,
    thresholds: &FeedbackThresholds,
    history: ClassifyHistory,
) -> FeedbackCategory {
    let Some(mean) = cur.mean_dbm else {
        return if history.empty_streak + 1 >= thresholds.blackout_windows {
            FeedbackCategory::Blackout
        } else {
            FeedbackCategory::Steady
        };
    };
    if mean >= thresholds.found_mean_dbm {
        return FeedbackCategory::Found;
    }
    if is_weak(cur, thresholds) && history.weak_streak + 1 >= thresholds.lost_windows {
        return FeedbackCategory::Lost;
    }
    match prev.and_then(|p| p.mean_dbm) {
        Some(p) if mean - p >= thresholds.trend_delta_db => FeedbackCategory::Closer,
        Some(p) if mean - p <= -thresholds.trend_delta_db => FeedbackCategory::Farther,
        _ => FeedbackCategory::Steady,
    }
}

/// Result of one tracked classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub category: FeedbackCategory,
    /// Change of the window mean against the reference, when both exist.
    pub delta_db: Option<f64>,
    pub window: RssWindow,
}

/// Holds the reference window for trend detection.
///
/// The reference only moves when a trend is reported, so a slow drift that
/// adds up to `trend_delta_db` over several windows is still reported. It is
/// dropped when the player turns (body shadowing changes the baseline) and
/// after an empty window.
#[derive(Debug, Clone, Default)]
pub struct TrendTracker {
    reference: Option<RssWindow>,
    reference_orientation: Option<Orientation>,
    history: ClassifyHistory,
}

impl TrendTracker {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn reference(&self) -> Option<&RssWindow> {
        self.reference.as_ref()
    }

    pub fn observe(&mut self, cur: RssWindow, orientation: Orientation, thresholds: &FeedbackThresholds) -> Observation {
        if self.reference_orientation != Some(orientation) {
            self.reference = None;
        }
        let category = classify(self.reference.as_ref(), &cur, thresholds, self.history);
        let delta_db = match (self.reference.as_ref().and_then(|r| r.mean_dbm), cur.mean_dbm) {
            (Some(r), Some(c)) => Some(c - r),
            _ => None,
        };
        self.history = self.history.after(&cur, thresholds);
        if cur.is_empty() {
            self.reference = None;
        } else if self.reference.is_none() || category.is_trend() {
            self.reference = Some(cur.clone());
            self.reference_orientation = Some(orientation);
        }
        Observation { category, delta_db, window: cur }
    }
}
