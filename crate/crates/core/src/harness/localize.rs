use serde::Serialize;

use crate::rf::FingerprintGrid;
use crate::scanner::RssWindow;
use crate::world::{FloorCell, Orientation, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocationEstimate {
    pub location_id: u32,
    pub at: FloorCell,
    /// Sum of squared differences between observed and stored means.
    pub score: f64,
}

impl LocationEstimate {
    pub fn error_m(&self, world: &World, truth: FloorCell) -> f64 {
        world.distance_m(self.at.cell, truth.cell)
    }
}

/// Nearest-neighbour match of the observed window means against the stored
/// means for `orientation`. Only beacons with a non-empty window and a grid
/// take part; a location must have a reading for every one of them. Ties go
/// to the lowest location id.
pub fn fingerprint_localize(
    windows: &[RssWindow],
    grids: &[FingerprintGrid],
    orientation: Orientation,
) -> Option<LocationEstimate> {
    let observed: Vec<(&FingerprintGrid, f64)> = windows
        .iter()
        .filter_map(|w| {
            let mean = w.mean_dbm?;
            let grid = grids.iter().find(|g| g.beacon_id == w.beacon_id)?;
            Some((grid, mean))
        })
        .collect();
    let (first, _) = observed.first()?;
    let mut best: Option<LocationEstimate> = None;
    'locations: for (&id, &at) in &first.locations {
        let mut score = 0.0;
        for (grid, mean) in &observed {
            let Some(r) = grid.get(id, orientation) else { continue 'locations };
            score += (mean - r.mean_dbm).powi(2);
        }
        if best.is_none_or(|b| score < b.score) {
            best = Some(LocationEstimate { location_id: id, at, score });
        }
    }
    best
}
