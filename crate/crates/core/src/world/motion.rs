use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Orientation, PlayerState, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "dir", rename_all = "snake_case")]
pub enum MoveCommand {
    /// Face `dir` and walk one cell.
    Step(Orientation),
    /// Face `dir` without moving.
    Turn(Orientation),
    TakeStairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    pub step_duration_s: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self { step_duration_s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveOutcome {
    pub state: PlayerState,
    pub blocked: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("no stairway at floor {floor} cell {cell}")]
    NotOnStairway { floor: u32, cell: super::Cell },
    #[error("player is in transit to {0:?}")]
    InTransit(String),
    #[error("player state is not valid for this world")]
    InvalidState,
}

/// Applies one command. Every command, blocked or not, advances the clock by
/// one step duration.
pub fn move_player(
    world: &World,
    config: &MotionConfig,
    state: &PlayerState,
    command: MoveCommand,
) -> Result<MoveOutcome, MotionError> {
    if let Some(to) = &state.transit_to {
        return Err(MotionError::InTransit(to.clone()));
    }
    let venue = world.venue(&state.venue).ok_or(MotionError::InvalidState)?;
    let floor = venue.floor(state.floor).ok_or(MotionError::InvalidState)?;

    let mut next = state.clone();
    next.clock_s = state.clock_s + config.step_duration_s;
    let mut blocked = false;

    match command {
        MoveCommand::Turn(dir) => next.orientation = dir,
        MoveCommand::Step(dir) => {
            next.orientation = dir;
            let target = state.cell.offset(dir);
            if floor.is_open(target) {
                next.cell = target;
            } else {
                blocked = true;
            }
        }
        MoveCommand::TakeStairs => {
            let up = floor.stairways.iter().find(|s| s.bottom == state.cell);
            let down = state
                .floor
                .checked_sub(1)
                .and_then(|i| venue.floor(i))
                .and_then(|below| below.stairways.iter().find(|s| s.top == state.cell));
            match (up, down) {
                (Some(s), _) => {
                    next.floor = state.floor + 1;
                    next.cell = s.top;
                }
                (None, Some(s)) => {
                    next.floor = state.floor - 1;
                    next.cell = s.bottom;
                }
                (None, None) => {
                    return Err(MotionError::NotOnStairway { floor: state.floor, cell: state.cell })
                }
            }
        }
    }
    Ok(MoveOutcome { state: next, blocked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{load_world, Cell};

    fn two_floor() -> World {
        load_world(
            r#"{"venues": [{"id": "v", "floors": [
                {"index": 0, "width": 5, "height": 5,
                 "obstacles": [{"x": 3, "y": 2, "kind": "wall"}],
                 "stairways": [{"bottom": [4, 4], "top": [0, 0]}]},
                {"index": 1, "width": 5, "height": 5}
            ]}]}"#,
        )
        .unwrap()
    }

    fn at(x: i32, y: i32, o: Orientation) -> PlayerState {
        PlayerState { venue: "v".into(), floor: 0, cell: Cell::new(x, y), orientation: o, clock_s: 0.0, transit_to: None }
    }

    #[test]
    fn turn_changes_orientation_only() {
        let w = two_floor();
        let out = move_player(&w, &MotionConfig::default(), &at(3, 3, Orientation::N), MoveCommand::Turn(Orientation::E)).unwrap();
        assert_eq!(out.state.cell, Cell::new(3, 3));
        assert_eq!(out.state.orientation, Orientation::E);
        assert!(!out.blocked);
        assert_eq!(out.state.clock_s, 1.0);
    }

    #[test]
    fn step_into_wall_is_blocked() {
        let w = two_floor();
        let out = move_player(&w, &MotionConfig::default(), &at(3, 3, Orientation::N), MoveCommand::Step(Orientation::N)).unwrap();
        assert!(out.blocked);
        assert_eq!(out.state.cell, Cell::new(3, 3));
    }

    #[test]
    fn step_off_grid_is_blocked() {
        let w = two_floor();
        let out = move_player(&w, &MotionConfig::default(), &at(0, 0, Orientation::N), MoveCommand::Step(Orientation::W)).unwrap();
        assert!(out.blocked);
        assert_eq!(out.state.orientation, Orientation::W);
    }

    #[test]
    fn stairs_toggle_floor_and_return() {
        let w = two_floor();
        let cfg = MotionConfig::default();
        let start = at(4, 4, Orientation::S);
        let up = move_player(&w, &cfg, &start, MoveCommand::TakeStairs).unwrap().state;
        assert_eq!((up.floor, up.cell), (1, Cell::new(0, 0)));
        let down = move_player(&w, &cfg, &up, MoveCommand::TakeStairs).unwrap().state;
        assert_eq!((down.floor, down.cell), (0, Cell::new(4, 4)));
    }

    #[test]
    fn stairs_rejected_off_stairway() {
        let w = two_floor();
        let err = move_player(&w, &MotionConfig::default(), &at(1, 1, Orientation::S), MoveCommand::TakeStairs).unwrap_err();
        assert!(matches!(err, MotionError::NotOnStairway { .. }));
    }
}
