//! Ghost quests: activation, found confirmation, quizzes, venue completion
//! and travel between venues.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feedback::{FeedbackCategory, FeedbackEvent};
use crate::world::{Orientation, PlayerState, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestState {
    Pending,
    Active,
    Found,
    Quiz,
    Complete,
}

impl QuestState {
    pub fn next(self) -> Option<QuestState> {
        use QuestState::*;
        match self {
            Pending => Some(Active),
            Active => Some(Found),
            Found => Some(Quiz),
            Quiz => Some(Complete),
            Complete => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quiz {
    pub question: String,
    pub choices: Vec<String>,
    #[serde(skip_serializing)]
    pub correct_index: usize,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quest {
    /// Artifact id; also the ghost id used in feedback events.
    pub id: String,
    pub ghost_id: String,
    pub ghost_name: String,
    pub intro_text: String,
    pub artifact_name: String,
    #[serde(skip_serializing)]
    pub target_beacon_id: String,
    pub venue: String,
    pub state: QuestState,
    pub quiz: Quiz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuestEvent {
    QuestActivated { quest_id: String, ghost_name: String, intro_text: String },
    ArtifactFound { quest_id: String, artifact_name: String },
    QuizPrompt { quest_id: String, question: String, choices: Vec<String> },
    QuizRetry { quest_id: String, attempts: u32 },
    QuestComplete { quest_id: String, attempts: u32 },
    Achievement { venue: String },
    /// Stand-in for posting to a social platform; nothing leaves the process.
    Share { venue: String, text: String },
    /// A ghost from the finished venue asks to be taken to a neighbour.
    LostGhost { from_venue: String, to_venue: String },
    Directions { to_venue: String, text: String },
    Arrived { venue: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestError {
    #[error("unknown quest {0:?}")]
    UnknownQuest(String),
    #[error("quest {quest_id:?} is {state:?}, not in a quiz")]
    NotInQuiz { quest_id: String, state: QuestState },
    #[error("choice {0} is out of range")]
    BadChoice(usize),
    #[error("{0:?} is not a neighbour of the current venue")]
    NotNeighbor(String),
    #[error("quest {0:?} is still in progress")]
    QuestInProgress(String),
    #[error("player is in transit")]
    InTransit,
    #[error("player is not in transit")]
    NotInTransit,
}

/// Every state change, in order, for auditing the state machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub quest: usize,
    pub from: QuestState,
    pub to: QuestState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSession {
    pub player: PlayerState,
    pub quests: Vec<Quest>,
    /// Index of the quest in progress (active, found or quiz).
    pub active_quest: Option<usize>,
    pub venue_complete: BTreeMap<String, bool>,
    pub achievements: Vec<String>,
    pub rng_seed: u64,
    #[serde(skip)]
    pub transitions: Vec<Transition>,
}

impl GameSession {
    /// New session at the entrance of `venue` (the first venue when absent),
    /// with every quest pending until [`GameSession::start`] or the first
    /// [`GameSession::advance`].
    pub fn new(world: &World, venue: Option<&str>, rng_seed: u64) -> Option<Self> {
        let venue = venue.or_else(|| world.venues.first().map(|v| v.id.as_str()))?;
        let player = PlayerState::at_entrance(world, venue, Orientation::N)?;
        let quests = world
            .artifacts
            .iter()
            .filter_map(|a| {
                let q = a.quest.as_ref()?;
                Some(Quest {
                    id: a.id.clone(),
                    ghost_id: a.id.clone(),
                    ghost_name: q.ghost_name.clone(),
                    intro_text: q.intro_text.clone(),
                    artifact_name: a.name.clone(),
                    target_beacon_id: a.beacon_id.clone(),
                    venue: a.venue.clone(),
                    state: QuestState::Pending,
                    quiz: Quiz {
                        question: q.quiz.question.clone(),
                        choices: q.quiz.choices.clone(),
                        correct_index: q.quiz.correct_index,
                        attempts: 0,
                    },
                })
            })
            .collect();
        let venue_complete = world.venues.iter().map(|v| (v.id.clone(), false)).collect();
        Some(Self {
            player,
            quests,
            active_quest: None,
            venue_complete,
            achievements: Vec::new(),
            rng_seed,
            transitions: Vec::new(),
        })
    }

    /// Activates the first pending quest of the current venue, if none is in
    /// progress.
    pub fn start(&mut self) -> Vec<QuestEvent> {
        self.activate_next()
    }

    pub fn active(&self) -> Option<&Quest> {
        self.active_quest.map(|i| &self.quests[i])
    }

    fn set_state(&mut self, i: usize, to: QuestState) {
        let from = self.quests[i].state;
        debug_assert_eq!(from.next(), Some(to));
        self.quests[i].state = to;
        self.transitions.push(Transition { quest: i, from, to });
    }

    fn activate_next(&mut self) -> Vec<QuestEvent> {
        if self.active_quest.is_some() || self.player.in_transit() {
            return Vec::new();
        }
        let venue = self.player.venue.clone();
        let Some(i) = self.quests.iter().position(|q| q.venue == venue && q.state == QuestState::Pending) else {
            return Vec::new();
        };
        self.set_state(i, QuestState::Active);
        self.active_quest = Some(i);
        let q = &self.quests[i];
        vec![QuestEvent::QuestActivated { quest_id: q.id.clone(), ghost_name: q.ghost_name.clone(), intro_text: q.intro_text.clone() }]
    }

    /// Feeds ghost feedback into the quest machine. A Found event from the
    /// active quest's ghost confirms the find and opens its quiz.
    pub fn advance(&mut self, feedback: &[FeedbackEvent]) -> Vec<QuestEvent> {
        let mut out = self.activate_next();
        for ev in feedback.iter().filter(|e| e.category == FeedbackCategory::Found) {
            let Some(i) = self.active_quest else {
                tracing::debug!(ghost = %ev.ghost_id, "found event with no active quest ignored");
                continue;
            };
            if self.quests[i].state != QuestState::Active || self.quests[i].ghost_id != ev.ghost_id {
                continue;
            }
            self.set_state(i, QuestState::Found);
            self.set_state(i, QuestState::Quiz);
            let q = &self.quests[i];
            out.push(QuestEvent::ArtifactFound { quest_id: q.id.clone(), artifact_name: q.artifact_name.clone() });
            out.push(QuestEvent::QuizPrompt { quest_id: q.id.clone(), question: q.quiz.question.clone(), choices: q.quiz.choices.clone() });
        }
        out
    }

    /// Wrong answers may be retried without limit.
    pub fn answer_quiz(&mut self, world: &World, quest_id: &str, choice: usize) -> Result<Vec<QuestEvent>, QuestError> {
        let i = self.quests.iter().position(|q| q.id == quest_id).ok_or_else(|| QuestError::UnknownQuest(quest_id.into()))?;
        let q = &mut self.quests[i];
        if q.state != QuestState::Quiz {
            return Err(QuestError::NotInQuiz { quest_id: quest_id.into(), state: q.state });
        }
        if choice >= q.quiz.choices.len() {
            return Err(QuestError::BadChoice(choice));
        }
        if choice != q.quiz.correct_index {
            q.quiz.attempts += 1;
            return Ok(vec![QuestEvent::QuizRetry { quest_id: quest_id.into(), attempts: q.quiz.attempts }]);
        }
        let attempts = q.quiz.attempts;
        let venue = q.venue.clone();
        self.set_state(i, QuestState::Complete);
        self.active_quest = None;
        let mut out = vec![QuestEvent::QuestComplete { quest_id: quest_id.into(), attempts }];
        out.extend(self.check_venue(world, &venue));
        out.extend(self.activate_next());
        Ok(out)
    }

    fn check_venue(&mut self, world: &World, venue: &str) -> Vec<QuestEvent> {
        let done = self.quests.iter().filter(|q| q.venue == venue).all(|q| q.state == QuestState::Complete);
        if !done || self.venue_complete.get(venue) == Some(&true) {
            return Vec::new();
        }
        self.venue_complete.insert(venue.to_string(), true);
        self.achievements.push(venue.to_string());
        let name = world.venue(venue).map_or(venue, |v| v.name.as_str());
        let mut out = vec![
            QuestEvent::Achievement { venue: venue.into() },
            QuestEvent::Share { venue: venue.into(), text: format!("I helped every ghost at {name} find its way home!") },
        ];
        let neighbors = world.venue(venue).map(|v| v.neighbors.clone()).unwrap_or_default();
        let unfinished = |n: &String| self.quests.iter().any(|q| &q.venue == n && q.state != QuestState::Complete);
        if let Some(to) = neighbors.iter().find(|n| unfinished(n)).or(neighbors.first()) {
            out.push(QuestEvent::LostGhost { from_venue: venue.into(), to_venue: to.clone() });
        }
        out
    }

    /// Leaves the current venue for a neighbour. Quests cannot be abandoned,
    /// so this is refused while one is in progress.
    pub fn handoff(&mut self, world: &World, to_venue: &str) -> Result<Vec<QuestEvent>, QuestError> {
        if self.player.in_transit() {
            return Err(QuestError::InTransit);
        }
        if let Some(q) = self.active() {
            return Err(QuestError::QuestInProgress(q.id.clone()));
        }
        let here = world.venue(&self.player.venue).ok_or_else(|| QuestError::NotNeighbor(to_venue.into()))?;
        if !here.neighbors.iter().any(|n| n == to_venue) {
            return Err(QuestError::NotNeighbor(to_venue.into()));
        }
        let dest = world.venue(to_venue).ok_or_else(|| QuestError::NotNeighbor(to_venue.into()))?;
        self.player.transit_to = Some(to_venue.into());
        Ok(vec![QuestEvent::Directions {
            to_venue: to_venue.into(),
            text: format!("Leave {} and walk to {}. The ghosts cannot see outside the museums, so follow the street signs until you reach the entrance.", here.name, dest.name),
        }])
    }

    /// Ends a transit at the destination entrance and activates its first quest.
    pub fn arrive(&mut self, world: &World) -> Result<Vec<QuestEvent>, QuestError> {
        let to = self.player.transit_to.clone().ok_or(QuestError::NotInTransit)?;
        let entrance = world.venue(&to).ok_or_else(|| QuestError::NotNeighbor(to.clone()))?.entrance;
        self.player.venue = to.clone();
        self.player.floor = entrance.floor;
        self.player.cell = entrance.cell;
        self.player.transit_to = None;
        let mut out = vec![QuestEvent::Arrived { venue: to }];
        out.extend(self.activate_next());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::Emotion;
    use crate::world::load_world_file;

    fn cambridge() -> World {
        load_world_file(crate::default_fixture_dir().join("cambridge.json")).unwrap()
    }

    fn found(ghost: &str) -> FeedbackEvent {
        FeedbackEvent {
            category: FeedbackCategory::Found,
            ghost_id: ghost.into(),
            message: "x".into(),
            emotion: Emotion::Excited,
            uncertainty_note: None,
            timestamp_s: 0.0,
        }
    }

    fn started(w: &World) -> GameSession {
        let mut s = GameSession::new(w, None, 1).unwrap();
        s.start();
        s
    }

    fn finish_active(s: &mut GameSession, w: &World) -> Vec<QuestEvent> {
        let q = s.active().unwrap().clone();
        s.advance(&[found(&q.ghost_id)]);
        s.answer_quiz(w, &q.id, q.quiz.correct_index).unwrap()
    }

    #[test]
    fn found_opens_quiz() {
        let w = cambridge();
        let mut s = GameSession::new(&w, None, 1).unwrap();
        assert!(s.active().is_none());
        let ev = s.start();
        assert!(matches!(ev[0], QuestEvent::QuestActivated { .. }));
        let ghost = s.active().unwrap().ghost_id.clone();
        let out = s.advance(&[found(&ghost)]);
        assert_eq!(s.active().unwrap().state, QuestState::Quiz);
        assert!(out.iter().any(|e| matches!(e, QuestEvent::QuizPrompt { .. })));
    }

    #[test]
    fn found_for_other_ghost_ignored() {
        let w = cambridge();
        let mut s = started(&w);
        assert!(s.advance(&[found("canoe")]).is_empty());
        assert_eq!(s.active().unwrap().state, QuestState::Active);
    }

    #[test]
    fn retries_count_attempts() {
        let w = cambridge();
        let mut s = started(&w);
        let q = s.active().unwrap().clone();
        s.advance(&[found(&q.ghost_id)]);
        let wrong = (q.quiz.correct_index + 1) % q.quiz.choices.len();
        s.answer_quiz(&w, &q.id, wrong).unwrap();
        s.answer_quiz(&w, &q.id, wrong).unwrap();
        let out = s.answer_quiz(&w, &q.id, q.quiz.correct_index).unwrap();
        assert_eq!(out[0], QuestEvent::QuestComplete { quest_id: q.id.clone(), attempts: 2 });
    }

    #[test]
    fn answer_on_pending_rejected() {
        let w = cambridge();
        let mut s = started(&w);
        let pending = s.quests.iter().find(|q| q.state == QuestState::Pending).unwrap().id.clone();
        assert!(matches!(s.answer_quiz(&w, &pending, 0), Err(QuestError::NotInQuiz { .. })));
    }

    #[test]
    fn venue_completion_and_handoff() {
        let w = cambridge();
        let mut s = started(&w);
        let first_venue = s.player.venue.clone();
        assert!(matches!(s.handoff(&w, "maa"), Err(QuestError::QuestInProgress(_))));
        finish_active(&mut s, &w);
        let out = finish_active(&mut s, &w);
        assert!(out.contains(&QuestEvent::Achievement { venue: first_venue.clone() }));
        let to = out
            .iter()
            .find_map(|e| match e {
                QuestEvent::LostGhost { to_venue, .. } => Some(to_venue.clone()),
                _ => None,
            })
            .unwrap();
        assert!(matches!(s.handoff(&w, &first_venue), Err(QuestError::NotNeighbor(_))));
        let dir = s.handoff(&w, &to).unwrap();
        assert!(matches!(dir[0], QuestEvent::Directions { .. }));
        assert!(s.player.in_transit());
        let arr = s.arrive(&w).unwrap();
        assert_eq!(s.player.cell, w.venue(&to).unwrap().entrance.cell);
        assert!(arr.iter().any(|e| matches!(e, QuestEvent::QuestActivated { .. })));
    }

    #[test]
    fn all_venues_one_achievement_each() {
        let w = cambridge();
        let mut s = started(&w);
        loop {
            while s.active().is_some() {
                finish_active(&mut s, &w);
            }
            let here = s.player.venue.clone();
            let next = w.venue(&here).unwrap().neighbors.iter().find(|n| !s.venue_complete[*n]).cloned();
            let Some(next) = next else { break };
            s.handoff(&w, &next).unwrap();
            s.arrive(&w).unwrap();
        }
        let mut a = s.achievements.clone();
        a.sort();
        assert_eq!(a, vec!["maa".to_string(), "sedgwick".to_string(), "whipple".to_string()]);
    }
}
