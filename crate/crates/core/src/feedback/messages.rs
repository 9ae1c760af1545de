use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::scanner::RssWindow;

use super::{Emotion, FeedbackCategory, FeedbackError, FeedbackEvent, FeedbackThresholds, SeamStrategy};

const DEFAULT_TABLE: &str = include_str!("../../../../fixtures/messages.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageLine {
    pub text: String,
    pub emotion: Emotion,
}

/// Ghost lines per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageTable {
    pub lines: BTreeMap<FeedbackCategory, Vec<MessageLine>>,
}

impl Default for MessageTable {
    fn default() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("bundled message table is valid")
    }
}

impl MessageTable {
    pub fn from_json(text: &str) -> Result<Self, FeedbackError> {
        let table: MessageTable = serde_json::from_str(text).map_err(|e| FeedbackError::Table(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        for category in FeedbackCategory::ALL {
            let lines = self.lines.get(&category).map(Vec::as_slice).unwrap_or_default();
            if lines.is_empty() {
                return Err(FeedbackError::Table(format!("no lines for {category:?}")));
            }
            for line in lines {
                if line.text.trim().is_empty() {
                    return Err(FeedbackError::Table(format!("empty line for {category:?}")));
                }
                if !Emotion::allowed_for(category).contains(&line.emotion) {
                    return Err(FeedbackError::Table(format!("{:?} is not allowed for {category:?}", line.emotion)));
                }
            }
        }
        Ok(())
    }
}

pub struct RenderRequest<'a> {
    pub category: FeedbackCategory,
    pub ghost_id: &'a str,
    pub strategy: SeamStrategy,
    pub window: Option<&'a RssWindow>,
    /// Change against the trend reference, used by the optimistic strategy.
    pub delta_db: Option<f64>,
    pub timestamp_s: f64,
}

/// Per-session message selection: round-robin through each category's lines.
#[derive(Debug, Clone)]
pub struct MessageRenderer {
    table: MessageTable,
    thresholds: FeedbackThresholds,
    ghosts: BTreeSet<String>,
    cursors: BTreeMap<FeedbackCategory, usize>,
}

fn short(v: f64) -> String {
    let s = format!("{v:.1}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

impl MessageRenderer {
    pub fn new(table: MessageTable, thresholds: FeedbackThresholds, ghosts: impl IntoIterator<Item = String>) -> Self {
        Self { table, thresholds, ghosts: ghosts.into_iter().collect(), cursors: BTreeMap::new() }
    }

    pub fn render_message(&mut self, req: RenderRequest<'_>) -> Result<Option<FeedbackEvent>, FeedbackError> {
        if !self.ghosts.contains(req.ghost_id) {
            return Err(FeedbackError::UnknownGhost(req.ghost_id.to_string()));
        }
        let mut category = req.category;
        let mut note = None;
        match req.strategy {
            SeamStrategy::Opportunistic => {}
            SeamStrategy::Pessimistic => {
                if let Some(w) = req.window {
                    let noisy = w.sd_db.is_some_and(|sd| sd > self.thresholds.high_sd_db);
                    if w.coverage < 1.0 || noisy {
                        return Ok(None);
                    }
                }
            }
            SeamStrategy::Optimistic => {
                if category == FeedbackCategory::Steady {
                    match req.delta_db {
                        Some(d) if d > 0.0 => category = FeedbackCategory::Closer,
                        Some(d) if d < 0.0 => category = FeedbackCategory::Farther,
                        _ => {}
                    }
                }
            }
            SeamStrategy::Cautious => {
                note = req.window.map(|w| match (w.mean_dbm, w.sd_db) {
                    (Some(m), Some(sd)) => format!("{} ± {} dBm", short(m), short(sd)),
                    _ => "no signal".to_string(),
                });
            }
        }
        let lines = &self.table.lines[&category];
        let cursor = self.cursors.entry(category).or_insert(0);
        let line = &lines[*cursor % lines.len()];
        *cursor += 1;
        Ok(Some(FeedbackEvent {
            category,
            ghost_id: req.ghost_id.to_string(),
            message: line.text.clone(),
            emotion: line.emotion,
            uncertainty_note: note,
            timestamp_s: req.timestamp_s,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn renderer() -> MessageRenderer {
        MessageRenderer::new(MessageTable::default(), FeedbackThresholds::default(), ["ammy".to_string()])
    }

    fn window(mean: f64, sd: f64, n: usize) -> RssWindow {
        RssWindow {
            beacon_id: "b".into(),
            t_start_s: 0.0,
            t_end_s: 5.0,
            n,
            expected: 50,
            mean_dbm: Some(mean),
            sd_db: Some(sd),
            coverage: n as f64 / 50.0,
        }
    }

    fn req<'a>(c: FeedbackCategory, s: SeamStrategy, w: Option<&'a RssWindow>) -> RenderRequest<'a> {
        RenderRequest { category: c, ghost_id: "ammy", strategy: s, window: w, delta_db: None, timestamp_s: 5.0 }
    }

    #[test]
    fn lost_line_is_angry() {
        let e = renderer().render_message(req(FeedbackCategory::Lost, SeamStrategy::Opportunistic, None)).unwrap().unwrap();
        assert_eq!(e.emotion, Emotion::Angry);
        assert_eq!(e.message, "I can't see anything familiar here, I think we're getting lost!");
    }

    #[test]
    fn pessimistic_suppresses_partial_window() {
        let w = window(-70.0, 2.0, 30);
        assert!(renderer().render_message(req(FeedbackCategory::Closer, SeamStrategy::Pessimistic, Some(&w))).unwrap().is_none());
        let noisy = window(-70.0, 7.0, 50);
        assert!(renderer().render_message(req(FeedbackCategory::Closer, SeamStrategy::Pessimistic, Some(&noisy))).unwrap().is_none());
        let clean = window(-70.0, 2.0, 50);
        assert!(renderer().render_message(req(FeedbackCategory::Closer, SeamStrategy::Pessimistic, Some(&clean))).unwrap().is_some());
    }

    #[test]
    fn cautious_note() {
        let w = window(-75.0, 4.0, 50);
        let e = renderer().render_message(req(FeedbackCategory::Steady, SeamStrategy::Cautious, Some(&w))).unwrap().unwrap();
        assert_eq!(e.emotion, Emotion::Neutral);
        assert_eq!(e.uncertainty_note.as_deref(), Some("-75 ± 4 dBm"));
    }

    #[test]
    fn optimistic_promotes_small_changes() {
        let mut r = renderer();
        let mut q = req(FeedbackCategory::Steady, SeamStrategy::Optimistic, None);
        q.delta_db = Some(-0.4);
        assert_eq!(r.render_message(q).unwrap().unwrap().category, FeedbackCategory::Farther);
    }

    #[test]
    fn round_robin_cycles() {
        let mut r = renderer();
        let texts: Vec<String> = (0..4)
            .map(|_| r.render_message(req(FeedbackCategory::Closer, SeamStrategy::Opportunistic, None)).unwrap().unwrap().message)
            .collect();
        assert_eq!(texts[0], "Yes, I can see we're going into the right direction!");
        assert_ne!(texts[0], texts[1]);
        assert_eq!(texts[0], texts[3]);
    }

    #[test]
    fn unknown_ghost_rejected() {
        let mut r = renderer();
        let mut q = req(FeedbackCategory::Closer, SeamStrategy::Opportunistic, None);
        q.ghost_id = "nobody";
        assert_eq!(r.render_message(q).unwrap_err(), FeedbackError::UnknownGhost("nobody".into()));
    }

    #[test]
    fn table_rejects_inconsistent_emotion() {
        let mut t = MessageTable::default();
        t.lines.get_mut(&FeedbackCategory::Closer).unwrap()[0].emotion = Emotion::Angry;
        assert!(t.validate().is_err());
        let mut t = MessageTable::default();
        t.lines.remove(&FeedbackCategory::Found);
        assert!(t.validate().is_err());
    }
}
