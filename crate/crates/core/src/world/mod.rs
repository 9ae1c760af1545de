//! Grid world: venues, floors, beacons, artifacts and the player.
//!
//! Coordinates are integer cells of `cell_size_m` metres. `x` grows east and
//! `y` grows south, so north is `(0, -1)`.

mod geometry;
mod load;
mod motion;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use geometry::{path_obstruction, supercover, GeometryError, ObstructionSummary};
pub use load::{
    load_world, load_world_file, ArtifactDoc, BeaconDoc, EntranceDoc, FloorDoc, ObstacleDoc,
    QuestDoc, QuizDoc, StairwayDoc, VenueDoc, WorldDoc, WorldError,
};
pub use motion::{move_player, MotionConfig, MotionError, MoveCommand, MoveOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dir: Orientation) -> Self {
        let (dx, dy) = dir.unit();
        Self::new(self.x + dx, self.y + dy)
    }

    /// Euclidean distance between cell centres, in cells.
    pub fn distance(self, other: Cell) -> f64 {
        let dx = f64::from(other.x - self.x);
        let dy = f64::from(other.y - self.y);
        dx.hypot(dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    N,
    E,
    S,
    W,
}

impl Orientation {
    /// Clockwise order, which is also the greedy agent's turn cycle.
    pub const ALL: [Orientation; 4] = [Orientation::N, Orientation::E, Orientation::S, Orientation::W];

    pub fn unit(self) -> (i32, i32) {
        match self {
            Orientation::N => (0, -1),
            Orientation::E => (1, 0),
            Orientation::S => (0, 1),
            Orientation::W => (-1, 0),
        }
    }

    pub fn clockwise(self) -> Self {
        match self {
            Orientation::N => Orientation::E,
            Orientation::E => Orientation::S,
            Orientation::S => Orientation::W,
            Orientation::W => Orientation::N,
        }
    }

    pub fn opposite(self) -> Self {
        self.clockwise().clockwise()
    }

    pub fn as_char(self) -> char {
        match self {
            Orientation::N => 'N',
            Orientation::E => 'E',
            Orientation::S => 'S',
            Orientation::W => 'W',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'N' => Some(Orientation::N),
            'E' => Some(Orientation::E),
            'S' => Some(Orientation::S),
            'W' => Some(Orientation::W),
            _ => None,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl std::str::FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Orientation::from_char(c).ok_or_else(|| format!("bad orientation {s:?}")),
            _ => Err(format!("bad orientation {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Wall,
    Shelf,
}

/// Links `bottom` on this floor with `top` on the floor above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stairway {
    pub bottom: Cell,
    pub top: Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Floor {
    pub index: u32,
    pub width: u32,
    pub height: u32,
    pub obstacles: BTreeMap<Cell, ObstacleKind>,
    pub stairways: Vec<Stairway>,
}

impl Floor {
    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as u32) < self.width && (cell.y as u32) < self.height
    }

    pub fn obstacle(&self, cell: Cell) -> Option<ObstacleKind> {
        self.obstacles.get(&cell).copied()
    }

    pub fn is_open(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && !self.obstacles.contains_key(&cell)
    }

    /// Open cells in row-major order.
    pub fn open_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i32)
            .flat_map(move |y| (0..self.width as i32).map(move |x| Cell::new(x, y)))
            .filter(move |c| !self.obstacles.contains_key(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeaconRole {
    Artifact,
    StairwayTop,
    StairwayBottom,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Beacon {
    pub id: String,
    pub venue: String,
    pub floor: u32,
    pub cell: Cell,
    pub tx_power_dbm: f64,
    pub adv_rate_hz: f64,
    pub role: BeaconRole,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuizContent {
    pub question: String,
    pub choices: Vec<String>,
    pub correct_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestContent {
    pub ghost_name: String,
    pub intro_text: String,
    pub quiz: QuizContent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub id: String,
    pub beacon_id: String,
    pub name: String,
    pub venue: String,
    pub floor: u32,
    pub quest: Option<QuestContent>,
}

/// A cell on a given floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FloorCell {
    pub floor: u32,
    pub cell: Cell,
}

impl FloorCell {
    pub const fn new(floor: u32, cell: Cell) -> Self {
        Self { floor, cell }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Venue {
    pub id: String,
    pub name: String,
    pub floors: Vec<Floor>,
    pub neighbors: Vec<String>,
    pub entrance: FloorCell,
}

impl Venue {
    pub fn floor(&self, index: u32) -> Option<&Floor> {
        self.floors.get(index as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub venues: Vec<Venue>,
    pub cell_size_m: f64,
    /// All beacons in document order.
    pub beacons: Vec<Beacon>,
    /// All artifacts in document order, which is also quest order.
    pub artifacts: Vec<Artifact>,
}

impl World {
    pub fn venue(&self, id: &str) -> Option<&Venue> {
        self.venues.iter().find(|v| v.id == id)
    }

    pub fn floor(&self, venue: &str, index: u32) -> Option<&Floor> {
        self.venue(venue)?.floor(index)
    }

    pub fn beacon(&self, id: &str) -> Option<&Beacon> {
        self.beacons.iter().find(|b| b.id == id)
    }

    pub fn beacon_index(&self, id: &str) -> Option<usize> {
        self.beacons.iter().position(|b| b.id == id)
    }

    pub fn beacons_in<'a>(&'a self, venue: &'a str) -> impl Iterator<Item = &'a Beacon> + 'a {
        self.beacons.iter().filter(move |b| b.venue == venue)
    }

    pub fn artifact(&self, id: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.id == id)
    }

    pub fn is_open(&self, venue: &str, at: FloorCell) -> bool {
        self.floor(venue, at.floor).is_some_and(|f| f.is_open(at.cell))
    }

    /// Metres between two cell centres.
    pub fn distance_m(&self, a: Cell, b: Cell) -> f64 {
        a.distance(b) * self.cell_size_m
    }

    /// Obstacle-free single-floor room with one artifact beacon `target`.
    pub fn open_room(width: u32, height: u32, target: Cell) -> Result<World, WorldError> {
        let doc = WorldDoc {
            cell_size_m: 1.0,
            venues: vec![VenueDoc {
                id: "room".into(),
                name: None,
                neighbors: vec![],
                entrance: None,
                floors: vec![FloorDoc {
                    index: 0,
                    width,
                    height,
                    obstacles: vec![],
                    stairways: vec![],
                    beacons: vec![BeaconDoc {
                        id: "target".into(),
                        x: target.x,
                        y: target.y,
                        tx_power_dbm: load::DEFAULT_TX_POWER_DBM,
                        adv_rate_hz: load::DEFAULT_ADV_RATE_HZ,
                        role: BeaconRole::Artifact,
                    }],
                    artifacts: vec![ArtifactDoc {
                        id: "artifact".into(),
                        beacon_id: "target".into(),
                        name: "Target".into(),
                        quest: None,
                    }],
                }],
            }],
        };
        World::from_doc(doc)
    }
}

/// Where the player is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub venue: String,
    pub floor: u32,
    pub cell: Cell,
    pub orientation: Orientation,
    pub clock_s: f64,
    /// Destination venue while walking through dead space between venues.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transit_to: Option<String>,
}

impl PlayerState {
    pub fn at_entrance(world: &World, venue: &str, orientation: Orientation) -> Option<Self> {
        let v = world.venue(venue)?;
        Some(Self {
            venue: v.id.clone(),
            floor: v.entrance.floor,
            cell: v.entrance.cell,
            orientation,
            clock_s: 0.0,
            transit_to: None,
        })
    }

    pub fn position(&self) -> FloorCell {
        FloorCell::new(self.floor, self.cell)
    }

    pub fn in_transit(&self) -> bool {
        self.transit_to.is_some()
    }

    /// Checks the state invariants against `world`.
    pub fn is_valid(&self, world: &World) -> bool {
        self.clock_s.is_finite() && self.clock_s >= 0.0 && world.is_open(&self.venue, self.position())
    }
}
