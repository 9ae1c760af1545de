#![allow(dead_code)]

use ghostsim_core::rf::FingerprintGrid;
use ghostsim_core::world::load_world_file;
use ghostsim_core::{default_fixture_dir, Cell, Orientation, PlayerState, World};

pub const EAST_WING: &str = "sedgwick-east-wing";

pub fn world(name: &str) -> World {
    load_world_file(default_fixture_dir().join(format!("{name}.json"))).expect("fixture loads")
}

pub fn east_wing_grid() -> FingerprintGrid {
    FingerprintGrid::from_csv_path("beacon1", default_fixture_dir().join("eastwing_beacon1.csv")).expect("grid loads")
}

pub fn pose(venue: &str, floor: u32, cell: Cell, orientation: Orientation) -> PlayerState {
    PlayerState { venue: venue.into(), floor, cell, orientation, clock_s: 0.0, transit_to: None }
}

/// Nearest-rank percentile.
pub fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * values.len() as f64).ceil().max(1.0) as usize;
    values[rank - 1]
}
