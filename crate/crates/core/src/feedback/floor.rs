use crate::rf::RssSample;
use crate::scanner::RssWindow;
use crate::world::{BeaconRole, World};

use super::FeedbackThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Drop,
}

/// Keeps a sample only if its beacon sits on the active floor.
pub fn floor_filter(active_floor: u32, sample: &RssSample, world: &World) -> FilterDecision {
    match world.beacon(&sample.beacon_id) {
        Some(b) if b.floor == active_floor => FilterDecision::Keep,
        Some(_) => FilterDecision::Drop,
        None => {
            tracing::warn!(beacon = %sample.beacon_id, "dropping sample from unknown beacon");
            FilterDecision::Drop
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FloorUpdate {
    pub floor: u32,
    pub switched: bool,
}

/// Applies the stairway switches. A stairway-top beacon at or above
/// `switch_mean_dbm` selects its (upper) floor, a stairway-bottom beacon its
/// (lower) floor. Windows of other beacons are ignored. When several qualify
/// the strongest wins; equal means pointing at different floors change
/// nothing.
pub fn update_active_floor(
    active_floor: u32,
    windows: &[RssWindow],
    world: &World,
    thresholds: &FeedbackThresholds,
) -> FloorUpdate {
    let mut best: Option<(f64, u32)> = None;
    let mut tied = false;
    for w in windows {
        let Some(beacon) = world.beacon(&w.beacon_id) else { continue };
        if beacon.role == BeaconRole::Artifact {
            continue;
        }
        let Some(mean) = w.mean_dbm.filter(|m| *m >= thresholds.switch_mean_dbm) else { continue };
        match best {
            None => best = Some((mean, beacon.floor)),
            Some((m, _)) if mean > m => {
                best = Some((mean, beacon.floor));
                tied = false;
            }
            Some((m, f)) if mean == m && f != beacon.floor => tied = true,
            _ => {}
        }
    }
    match best {
        Some((_, floor)) if !tied && floor != active_floor => FloorUpdate { floor, switched: true },
        _ => FloorUpdate { floor: active_floor, switched: false },
    }
}
