//! World-description documents (JSON) and their validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Artifact, Beacon, BeaconRole, Cell, Floor, FloorCell, ObstacleKind, QuestContent, QuizContent,
    Stairway, Venue, World,
};

pub const DEFAULT_TX_POWER_DBM: f64 = -4.0;
pub const DEFAULT_ADV_RATE_HZ: f64 = 10.0;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world document parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid {entity}: {reason}")]
    Invalid { entity: String, reason: String },
    #[error("cannot read world file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(entity: impl Into<String>, reason: impl Into<String>) -> WorldError {
    WorldError::Invalid { entity: entity.into(), reason: reason.into() }
}

fn default_cell_size() -> f64 {
    1.0
}
fn default_tx_power() -> f64 {
    DEFAULT_TX_POWER_DBM
}
fn default_adv_rate() -> f64 {
    DEFAULT_ADV_RATE_HZ
}
fn default_role() -> BeaconRole {
    BeaconRole::Artifact
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDoc {
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    pub venues: Vec<VenueDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VenueDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub floors: Vec<FloorDoc>,
    #[serde(default)]
    pub neighbors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entrance: Option<EntranceDoc>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntranceDoc {
    pub floor: u32,
    pub x: i32,
    pub y: i32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorDoc {
    pub index: u32,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub obstacles: Vec<ObstacleDoc>,
    #[serde(default)]
    pub stairways: Vec<StairwayDoc>,
    #[serde(default)]
    pub beacons: Vec<BeaconDoc>,
    #[serde(default)]
    pub artifacts: Vec<ArtifactDoc>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleDoc {
    pub x: i32,
    pub y: i32,
    pub kind: ObstacleKind,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StairwayDoc {
    pub bottom: [i32; 2],
    pub top: [i32; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconDoc {
    pub id: String,
    pub x: i32,
    pub y: i32,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    #[serde(default = "default_adv_rate")]
    pub adv_rate_hz: f64,
    #[serde(default = "default_role")]
    pub role: BeaconRole,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactDoc {
    pub id: String,
    pub beacon_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quest: Option<QuestDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestDoc {
    pub ghost_name: String,
    pub intro_text: String,
    pub quiz: QuizDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuizDoc {
    pub question: String,
    pub choices: Vec<String>,
    pub correct_index: usize,
}

/// Parses and validates a world-description document.
pub fn load_world(document: &str) -> Result<World, WorldError> {
    let doc: WorldDoc = serde_json::from_str(document).map_err(|e| WorldError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    World::from_doc(doc)
}

pub fn load_world_file(path: impl AsRef<Path>) -> Result<World, WorldError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| WorldError::Io { path: path.display().to_string(), source })?;
    load_world(&text)
}

impl World {
    pub fn from_doc(doc: WorldDoc) -> Result<World, WorldError> {
        if !(doc.cell_size_m > 0.0 && doc.cell_size_m.is_finite()) {
            return Err(invalid("world", format!("cell_size_m must be positive, got {}", doc.cell_size_m)));
        }
        if doc.venues.is_empty() {
            return Err(invalid("world", "at least one venue is required"));
        }
        let venue_ids: BTreeSet<&str> = doc.venues.iter().map(|v| v.id.as_str()).collect();
        if venue_ids.len() != doc.venues.len() {
            return Err(invalid("world", "venue ids must be unique"));
        }

        let mut venues = Vec::with_capacity(doc.venues.len());
        let mut beacons: Vec<Beacon> = Vec::new();
        let mut artifacts: Vec<Artifact> = Vec::new();

        for vdoc in &doc.venues {
            let floors = build_floors(vdoc)?;
            for n in &vdoc.neighbors {
                if n == &vdoc.id || !venue_ids.contains(n.as_str()) {
                    return Err(invalid(format!("venue {:?}", vdoc.id), format!("bad neighbor {n:?}")));
                }
            }
            let entrance = match vdoc.entrance {
                Some(e) => FloorCell::new(e.floor, Cell::new(e.x, e.y)),
                None => {
                    let cell = floors[0]
                        .open_cells()
                        .next()
                        .ok_or_else(|| invalid(format!("venue {:?}", vdoc.id), "floor 0 has no open cell"))?;
                    FloorCell::new(0, cell)
                }
            };
            let entrance_ok = floors.get(entrance.floor as usize).is_some_and(|f| f.is_open(entrance.cell));
            if !entrance_ok {
                return Err(invalid(format!("venue {:?}", vdoc.id), "entrance is not an open cell"));
            }

            for fdoc in &vdoc.floors {
                let floor = &floors[fdoc.index as usize];
                for bdoc in &fdoc.beacons {
                    let cell = Cell::new(bdoc.x, bdoc.y);
                    let entity = format!("beacon {:?}", bdoc.id);
                    if beacons.iter().any(|b| b.id == bdoc.id) {
                        return Err(invalid(entity, "duplicate beacon id"));
                    }
                    if !floor.in_bounds(cell) {
                        return Err(invalid(entity, format!("cell {cell} is out of bounds")));
                    }
                    if let Some(kind) = floor.obstacle(cell) {
                        return Err(invalid(entity, format!("cell {cell} is a {kind:?} obstacle")));
                    }
                    if !(bdoc.adv_rate_hz > 0.0 && bdoc.adv_rate_hz.is_finite()) {
                        return Err(invalid(entity, "adv_rate_hz must be positive"));
                    }
                    let on_stairs = match bdoc.role {
                        BeaconRole::Artifact => true,
                        BeaconRole::StairwayBottom => floor.stairways.iter().any(|s| s.bottom == cell),
                        BeaconRole::StairwayTop => fdoc.index > 0
                            && floors[fdoc.index as usize - 1].stairways.iter().any(|s| s.top == cell),
                    };
                    if !on_stairs {
                        return Err(invalid(entity, format!("{:?} beacon is not on a matching stairway cell", bdoc.role)));
                    }
                    beacons.push(Beacon {
                        id: bdoc.id.clone(),
                        venue: vdoc.id.clone(),
                        floor: fdoc.index,
                        cell,
                        tx_power_dbm: bdoc.tx_power_dbm,
                        adv_rate_hz: bdoc.adv_rate_hz,
                        role: bdoc.role,
                    });
                }
            }
            for fdoc in &vdoc.floors {
                for adoc in &fdoc.artifacts {
                    let entity = format!("artifact {:?}", adoc.id);
                    if artifacts.iter().any(|a| a.id == adoc.id) {
                        return Err(invalid(entity, "duplicate artifact id"));
                    }
                    let beacon = beacons
                        .iter()
                        .find(|b| b.id == adoc.beacon_id)
                        .ok_or_else(|| invalid(&entity, format!("unknown beacon {:?}", adoc.beacon_id)))?;
                    if beacon.venue != vdoc.id || beacon.floor != fdoc.index {
                        return Err(invalid(entity, "beacon is not on the artifact's floor"));
                    }
                    let quest = adoc.quest.as_ref().map(|q| build_quest(&entity, q)).transpose()?;
                    artifacts.push(Artifact {
                        id: adoc.id.clone(),
                        beacon_id: adoc.beacon_id.clone(),
                        name: adoc.name.clone(),
                        venue: vdoc.id.clone(),
                        floor: fdoc.index,
                        quest,
                    });
                }
            }

            venues.push(Venue {
                id: vdoc.id.clone(),
                name: vdoc.name.clone().unwrap_or_else(|| vdoc.id.clone()),
                floors,
                neighbors: vdoc.neighbors.clone(),
                entrance,
            });
        }

        Ok(World { venues, cell_size_m: doc.cell_size_m, beacons, artifacts })
    }
}

fn build_quest(entity: &str, q: &QuestDoc) -> Result<QuestContent, WorldError> {
    let n = q.quiz.choices.len();
    if !(2..=4).contains(&n) {
        return Err(invalid(entity, format!("quiz needs 2-4 choices, got {n}")));
    }
    if q.quiz.correct_index >= n {
        return Err(invalid(entity, format!("correct_index {} out of range", q.quiz.correct_index)));
    }
    Ok(QuestContent {
        ghost_name: q.ghost_name.clone(),
        intro_text: q.intro_text.clone(),
        quiz: QuizContent {
            question: q.quiz.question.clone(),
            choices: q.quiz.choices.clone(),
            correct_index: q.quiz.correct_index,
        },
    })
}

fn build_floors(vdoc: &VenueDoc) -> Result<Vec<Floor>, WorldError> {
    let venue = format!("venue {:?}", vdoc.id);
    if vdoc.floors.is_empty() {
        return Err(invalid(venue, "at least one floor is required"));
    }
    let mut by_index: BTreeMap<u32, &FloorDoc> = BTreeMap::new();
    for f in &vdoc.floors {
        if by_index.insert(f.index, f).is_some() {
            return Err(invalid(venue, format!("duplicate floor index {}", f.index)));
        }
    }
    if by_index.keys().copied().ne(0..vdoc.floors.len() as u32) {
        return Err(invalid(venue, "floor indices must be contiguous from 0"));
    }

    let mut floors = Vec::with_capacity(by_index.len());
    for (&index, fdoc) in &by_index {
        let entity = format!("floor {index} of venue {:?}", vdoc.id);
        if fdoc.width == 0 || fdoc.height == 0 {
            return Err(invalid(entity, "grid must be non-empty"));
        }
        let mut floor = Floor {
            index,
            width: fdoc.width,
            height: fdoc.height,
            obstacles: BTreeMap::new(),
            stairways: Vec::new(),
        };
        for o in &fdoc.obstacles {
            let cell = Cell::new(o.x, o.y);
            if !floor.in_bounds(cell) {
                return Err(invalid(entity, format!("obstacle {cell} out of bounds")));
            }
            floor.obstacles.insert(cell, o.kind);
        }
        floors.push(floor);
    }

    // Stairways need the floor above, so resolve them after all grids exist.
    for (&index, fdoc) in &by_index {
        let entity = format!("floor {index} of venue {:?}", vdoc.id);
        for s in &fdoc.stairways {
            let bottom = Cell::new(s.bottom[0], s.bottom[1]);
            let top = Cell::new(s.top[0], s.top[1]);
            if !floors[index as usize].is_open(bottom) {
                return Err(invalid(&entity, format!("stairway bottom {bottom} is not an open cell")));
            }
            let above = floors
                .get(index as usize + 1)
                .ok_or_else(|| invalid(&entity, "stairway leads to a missing floor"))?;
            if !above.is_open(top) {
                return Err(invalid(&entity, format!("stairway top {top} is not an open cell")));
            }
            floors[index as usize].stairways.push(Stairway { bottom, top });
        }
    }
    Ok(floors)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "venues": [{
            "id": "v",
            "neighbors": [],
            "floors": [{
                "index": 0, "width": 10, "height": 10,
                "obstacles": [{"x": 5, "y": 5, "kind": "wall"}],
                "stairways": [],
                "beacons": [{"id": "b1", "x": 2, "y": 2, "tx_power_dbm": -4, "adv_rate_hz": 10, "role": "artifact"}],
                "artifacts": [{"id": "a1", "beacon_id": "b1", "name": "Thing"}]
            }]
        }]
    }"#;

    #[test]
    fn minimal_document_loads() {
        let world = load_world(MINIMAL).unwrap();
        assert_eq!(world.venues.len(), 1);
        assert_eq!(world.beacons.len(), 1);
        assert_eq!(world.beacons[0].cell, Cell::new(2, 2));
        assert_eq!(world.venues[0].entrance, FloorCell::new(0, Cell::new(0, 0)));
    }

    #[test]
    fn beacon_on_wall_names_beacon() {
        let doc = MINIMAL.replace(r#""x": 2, "y": 2"#, r#""x": 5, "y": 5"#);
        let err = load_world(&doc).unwrap_err();
        match err {
            WorldError::Invalid { entity, reason } => {
                assert!(entity.contains("b1"), "{entity}");
                assert!(reason.contains("Wall"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let doc = "{\n  \"venues\": [\n    {\"id\": 3}\n  ]\n}";
        match load_world(doc).unwrap_err() {
            WorldError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_contiguous_floors_rejected() {
        let doc = MINIMAL.replace(r#""index": 0"#, r#""index": 1"#);
        assert!(matches!(load_world(&doc), Err(WorldError::Invalid { .. })));
    }

    #[test]
    fn zero_rate_rejected() {
        let doc = MINIMAL.replace(r#""adv_rate_hz": 10"#, r#""adv_rate_hz": 0"#);
        assert!(matches!(load_world(&doc), Err(WorldError::Invalid { .. })));
    }

    #[test]
    fn stairway_role_needs_stairway_cell() {
        let doc = MINIMAL.replace(r#""role": "artifact""#, r#""role": "stairway_bottom""#);
        let err = load_world(&doc).unwrap_err().to_string();
        assert!(err.contains("b1"), "{err}");
    }
}
