use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::FeedbackEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationMode {
    /// Shown at once with a sound cue.
    Realtime,
    /// Queued behind a vibrating badge until the player acknowledges.
    #[default]
    Popup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub event: FeedbackEvent,
    pub sound: bool,
    /// The event was announced by vibration before being shown.
    pub vibrated: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[error("nothing to acknowledge")]
pub struct AckWarning;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NotificationQueue {
    pub mode: NotificationMode,
    pub pending: VecDeque<FeedbackEvent>,
    pub vibration_active: bool,
}

impl NotificationQueue {
    pub fn new(mode: NotificationMode) -> Self {
        Self { mode, pending: VecDeque::new(), vibration_active: false }
    }

    /// Realtime delivers immediately; popup queues and starts vibrating.
    pub fn notify(&mut self, event: FeedbackEvent) -> Option<Delivery> {
        match self.mode {
            NotificationMode::Realtime => Some(Delivery { event, sound: true, vibrated: false }),
            NotificationMode::Popup => {
                self.pending.push_back(event);
                self.vibration_active = true;
                None
            }
        }
    }

    /// Shows the oldest pending popup.
    pub fn acknowledge(&mut self) -> Result<Delivery, AckWarning> {
        let event = self.pending.pop_front().ok_or_else(|| {
            tracing::warn!("acknowledge with no pending popup");
            AckWarning
        })?;
        self.vibration_active = !self.pending.is_empty();
        Ok(Delivery { event, sound: false, vibrated: true })
    }
}
