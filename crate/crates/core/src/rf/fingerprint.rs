use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;
use crate::world::{Beacon, Cell, FloorCell, Orientation, PlayerState, World};

use super::config::PropagationConfig;
use super::crowd::CrowdAttenuation;
use super::model::predict_rss;
use super::RssSample;

pub const GRID_CSV_HEADER: [&str; 7] =
    ["location_id", "x", "y", "floor", "orientation", "rss_mean_dbm", "rss_sd_db"];

#[derive(Debug, Error)]
pub enum GridError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("bad header: expected {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub mean_dbm: f64,
    pub sd_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSummary {
    pub locations: usize,
    pub orientations: usize,
    pub readings: usize,
}

/// Measured (location, orientation) readings for one beacon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FingerprintGrid {
    pub beacon_id: String,
    pub locations: BTreeMap<u32, FloorCell>,
    pub readings: BTreeMap<(u32, Orientation), Reading>,
}

impl FingerprintGrid {
    pub fn new(beacon_id: impl Into<String>) -> Self {
        Self { beacon_id: beacon_id.into(), ..Self::default() }
    }

    /// Adds a reading, enforcing one position per location and one reading per
    /// (location, orientation).
    pub fn insert(&mut self, location: u32, at: FloorCell, orientation: Orientation, reading: Reading) -> Result<(), String> {
        if !reading.mean_dbm.is_finite() || reading.mean_dbm > 0.0 {
            return Err(format!("rss_mean_dbm must be a finite value <= 0, got {}", reading.mean_dbm));
        }
        if !reading.sd_db.is_finite() || reading.sd_db < 0.0 {
            return Err(format!("rss_sd_db must be a finite value >= 0, got {}", reading.sd_db));
        }
        match self.locations.get(&location) {
            Some(prev) if *prev != at => {
                return Err(format!("location {location} already placed at floor {} ({}, {})", prev.floor, prev.cell.x, prev.cell.y))
            }
            _ => {}
        }
        if let Some((&other, _)) = self.locations.iter().find(|(id, pos)| **pos == at && **id != location) {
            return Err(format!("location {location} shares its cell with location {other}"));
        }
        if self.readings.contains_key(&(location, orientation)) {
            return Err(format!("duplicate reading for location {location} orientation {orientation}"));
        }
        self.locations.insert(location, at);
        self.readings.insert((location, orientation), reading);
        Ok(())
    }

    pub fn get(&self, location: u32, orientation: Orientation) -> Option<Reading> {
        self.readings.get(&(location, orientation)).copied()
    }

    pub fn location_at(&self, at: FloorCell) -> Option<u32> {
        self.locations.iter().find(|(_, pos)| **pos == at).map(|(id, _)| *id)
    }

    pub fn summary(&self) -> GridSummary {
        let mut orientations: Vec<Orientation> = self.readings.keys().map(|(_, o)| *o).collect();
        orientations.sort();
        orientations.dedup();
        GridSummary { locations: self.locations.len(), orientations: orientations.len(), readings: self.readings.len() }
    }

    pub fn from_csv_reader(beacon_id: impl Into<String>, reader: impl Read) -> Result<Self, GridError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(GRID_CSV_HEADER.iter().copied()) {
            return Err(GridError::Header {
                expected: GRID_CSV_HEADER.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut grid = Self::new(beacon_id);
        for record in rdr.records() {
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Err(GridError::Row { line, message: e.to_string() });
                }
            };
            let line = record.position().map_or(0, |p| p.line());
            let row_err = |message: String| GridError::Row { line, message };
            fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, String> {
                let raw = rec.get(i).unwrap_or("");
                raw.parse().map_err(|_| format!("{}: cannot parse {raw:?}", GRID_CSV_HEADER[i]))
            }
            let location: u32 = field(&record, 0).map_err(row_err)?;
            let x: i32 = field(&record, 1).map_err(row_err)?;
            let y: i32 = field(&record, 2).map_err(row_err)?;
            let floor: u32 = field(&record, 3).map_err(row_err)?;
            let orientation: Orientation = field(&record, 4).map_err(row_err)?;
            let mean_dbm: f64 = field(&record, 5).map_err(row_err)?;
            let sd_db: f64 = field(&record, 6).map_err(row_err)?;
            grid.insert(location, FloorCell::new(floor, Cell::new(x, y)), orientation, Reading { mean_dbm, sd_db })
                .map_err(row_err)?;
        }
        Ok(grid)
    }

    pub fn from_csv_path(beacon_id: impl Into<String>, path: impl AsRef<std::path::Path>) -> Result<Self, GridError> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(beacon_id, std::io::BufReader::new(file))
    }

    /// Rows ordered by location, then N, E, S, W.
    pub fn write_csv(&self, writer: impl Write) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(GRID_CSV_HEADER)?;
        for ((loc, o), r) in &self.readings {
            let at = self.locations[loc];
            w.write_record([
                loc.to_string(),
                at.cell.x.to_string(),
                at.cell.y.to_string(),
                at.floor.to_string(),
                o.to_string(),
                r.mean_dbm.to_string(),
                r.sd_db.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Checks every location is an open cell of the beacon's venue.
    pub fn check_against(&self, world: &World) -> Result<(), String> {
        let beacon = world.beacon(&self.beacon_id).ok_or_else(|| format!("unknown beacon {}", self.beacon_id))?;
        for (id, at) in &self.locations {
            if !world.is_open(&beacon.venue, *at) {
                return Err(format!("location {id} at floor {} ({}, {}) is not an open cell", at.floor, at.cell.x, at.cell.y));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayOutcome {
    Sample(RssSample),
    /// Calibrated location but no reading was taken in this orientation.
    NoReading,
    /// The player's cell is not a calibrated location.
    Uncalibrated,
}

/// Draws one advertisement from the measured distribution at the player's
/// location and orientation. One normal deviate is consumed per call in
/// non-deterministic mode, as for the parametric model.
pub fn replay_rss(
    grid: &FingerprintGrid,
    player: &PlayerState,
    deterministic: bool,
    rng: &mut RngStream,
    timestamp_s: f64,
) -> ReplayOutcome {
    let z = if deterministic { 0.0 } else { rng.standard_normal() };
    replay_with(grid, player, z, timestamp_s)
}

/// Replay with the normal deviate supplied.
pub(crate) fn replay_with(grid: &FingerprintGrid, player: &PlayerState, z: f64, timestamp_s: f64) -> ReplayOutcome {
    let Some(location) = grid.location_at(player.position()) else {
        return ReplayOutcome::Uncalibrated;
    };
    match grid.get(location, player.orientation) {
        None => ReplayOutcome::NoReading,
        Some(r) => ReplayOutcome::Sample(RssSample {
            beacon_id: grid.beacon_id.clone(),
            timestamp_s,
            rssi_dbm: (r.mean_dbm + r.sd_db * z).min(0.0),
        }),
    }
}

/// Noise-free survey of `beacon` over every open cell of its floor, as a
/// stand-in for a measured grid when the world has none. Location ids are
/// row-major cell indices plus one; cells below the detection floor get no
/// reading.
pub fn survey_grid(world: &World, config: &PropagationConfig, beacon: &Beacon) -> FingerprintGrid {
    let mut grid = FingerprintGrid::new(beacon.id.clone());
    let Some(floor) = world.floor(&beacon.venue, beacon.floor) else { return grid };
    let clean = PropagationConfig { deterministic: true, ..config.clone() };
    let mut rng = RngStream::new(0);
    for cell in floor.open_cells() {
        let id = (cell.y as u32) * floor.width + cell.x as u32 + 1;
        for o in Orientation::ALL {
            let player = PlayerState {
                venue: beacon.venue.clone(),
                floor: beacon.floor,
                cell,
                orientation: o,
                clock_s: 0.0,
                transit_to: None,
            };
            if let Some(s) = predict_rss(world, &clean, beacon, &player, CrowdAttenuation::CLEAR, &mut rng, 0.0) {
                let reading = Reading { mean_dbm: s.rssi_dbm, sd_db: config.noise_sigma_db };
                grid.insert(id, FloorCell::new(beacon.floor, cell), o, reading).expect("survey ids are unique");
            }
        }
    }
    grid
}
