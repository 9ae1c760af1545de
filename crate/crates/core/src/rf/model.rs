use crate::rng::RngStream;
use crate::world::{path_obstruction, Beacon, Orientation, PlayerState, World};

use super::config::{PropagationConfig, REFERENCE_TX_POWER_DBM};
use super::crowd::CrowdAttenuation;
use super::RssSample;

/// Distances below this are clamped; the player can stand on the beacon cell.
const MIN_DISTANCE_M: f64 = 0.5;

/// Body-shadowing loss for a player facing `orientation` with the beacon in
/// direction `bearing` (any non-zero vector, grid axes). `None` means the
/// player stands on the beacon and there is no bearing.
///
/// `max_loss_db * (1 - cos θ) / 2` where θ is the angle between the facing
/// direction and the bearing.
pub fn orientation_loss(orientation: Orientation, bearing: Option<(f64, f64)>, max_loss_db: f64) -> f64 {
    let Some((bx, by)) = bearing else { return 0.0 };
    let norm = bx.hypot(by);
    if norm == 0.0 {
        return 0.0;
    }
    let (fx, fy) = orientation.unit();
    let cos = (f64::from(fx) * bx + f64::from(fy) * by) / norm;
    max_loss_db * (1.0 - cos.clamp(-1.0, 1.0)) / 2.0
}

/// Noise-free, crowd-free RSS at the player's pose, or `None` when the
/// beacon cannot be heard at all (transit, other venue, other floor).
pub fn mean_rss(world: &World, config: &PropagationConfig, beacon: &Beacon, player: &PlayerState) -> Option<f64> {
    if player.in_transit() || player.venue != beacon.venue || player.floor != beacon.floor {
        return None;
    }
    let distance = world.distance_m(player.cell, beacon.cell).max(MIN_DISTANCE_M);
    let obstruction = path_obstruction(world, &beacon.venue, player.position(), beacon.position()).ok()?;
    let bearing = (player.cell != beacon.cell).then(|| {
        (f64::from(beacon.cell.x - player.cell.x), f64::from(beacon.cell.y - player.cell.y))
    });
    let power_1m = config.measured_power_1m_dbm + (beacon.tx_power_dbm - REFERENCE_TX_POWER_DBM);
    Some(
        power_1m
            - 10.0 * config.path_loss_exponent * distance.log10()
            - f64::from(obstruction.walls) * config.wall_loss_db
            - f64::from(obstruction.shelves) * config.shelf_loss_db
            - orientation_loss(player.orientation, bearing, config.orientation_max_loss_db),
    )
}

/// Applies crowd, noise (`z` is a standard normal deviate) and the detection
/// floor to a mean reading.
pub(crate) fn observe_rss(config: &PropagationConfig, mean: Option<f64>, crowd: CrowdAttenuation, z: f64) -> Option<f64> {
    let mut rssi = mean?;
    if !config.deterministic {
        if crowd.fully_blocked {
            return None;
        }
        rssi += z * config.noise_sigma_db - crowd.loss_db;
    }
    (rssi >= config.detection_floor_dbm).then_some(rssi.min(0.0))
}

/// One advertisement from `beacon` as heard by `player` at `timestamp_s`.
///
/// In non-deterministic mode exactly one normal deviate is drawn from `rng`
/// per call, whether or not a sample results, so the noise sequence for a
/// beacon does not depend on the player's path.
pub fn predict_rss(
    world: &World,
    config: &PropagationConfig,
    beacon: &Beacon,
    player: &PlayerState,
    crowd: CrowdAttenuation,
    rng: &mut RngStream,
    timestamp_s: f64,
) -> Option<RssSample> {
    let z = if config.deterministic { 0.0 } else { rng.standard_normal() };
    let rssi = observe_rss(config, mean_rss(world, config, beacon, player), crowd, z)?;
    Some(RssSample { beacon_id: beacon.id.clone(), timestamp_s, rssi_dbm: rssi })
}

impl Beacon {
    pub fn position(&self) -> crate::world::FloorCell {
        crate::world::FloorCell::new(self.floor, self.cell)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Cell;
    use approx::assert_abs_diff_eq;

    fn room() -> World {
        World::open_room(20, 20, Cell::new(10, 10)).unwrap()
    }

    fn player(x: i32, y: i32, o: Orientation) -> PlayerState {
        PlayerState { venue: "room".into(), floor: 0, cell: Cell::new(x, y), orientation: o, clock_s: 0.0, transit_to: None }
    }

    fn det(world: &World, p: &PlayerState) -> Option<f64> {
        let cfg = PropagationConfig::deterministic();
        let mut rng = RngStream::new(0);
        predict_rss(world, &cfg, &world.beacons[0], p, CrowdAttenuation::CLEAR, &mut rng, 0.0).map(|s| s.rssi_dbm)
    }

    #[test]
    fn one_metre_facing_beacon() {
        let w = room();
        // beacon is east of (9, 10)
        assert_abs_diff_eq!(det(&w, &player(9, 10, Orientation::E)).unwrap(), -58.0, epsilon = 1e-12);
    }

    #[test]
    fn two_metres_facing_beacon() {
        let w = room();
        let expected = -58.0 - 22.0 * 2f64.log10();
        assert_abs_diff_eq!(det(&w, &player(8, 10, Orientation::E)).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, -64.62, epsilon = 0.01);
    }

    #[test]
    fn back_to_beacon_costs_full_loss() {
        let w = room();
        assert_abs_diff_eq!(det(&w, &player(9, 10, Orientation::W)).unwrap(), -68.0, epsilon = 1e-12);
    }

    #[test]
    fn orientation_loss_angles() {
        assert_abs_diff_eq!(orientation_loss(Orientation::E, Some((1.0, 0.0)), 10.0), 0.0);
        assert_abs_diff_eq!(orientation_loss(Orientation::E, Some((-3.0, 0.0)), 10.0), 10.0);
        assert_abs_diff_eq!(orientation_loss(Orientation::N, Some((2.0, 0.0)), 10.0), 5.0, epsilon = 1e-12);
        assert_eq!(orientation_loss(Orientation::N, None, 10.0), 0.0);
    }

    #[test]
    fn five_metre_range_holds() {
        let w = room();
        let v = det(&w, &player(5, 10, Orientation::E)).unwrap();
        assert_abs_diff_eq!(v, -58.0 - 22.0 * 5f64.log10(), epsilon = 1e-12);
        assert!(v > -92.0);
    }

    #[test]
    fn other_floor_or_transit_is_silent() {
        let w = room();
        let mut p = player(9, 10, Orientation::E);
        p.transit_to = Some("elsewhere".into());
        assert!(det(&w, &p).is_none());
        let mut p = player(9, 10, Orientation::E);
        p.floor = 1;
        assert!(det(&w, &p).is_none());
    }

    #[test]
    fn crowd_block_silences_stochastic_mode() {
        let w = room();
        let cfg = PropagationConfig::default();
        let mut rng = RngStream::new(1);
        let blocked = CrowdAttenuation { loss_db: 10.0, fully_blocked: true };
        let p = player(9, 10, Orientation::E);
        assert!(predict_rss(&w, &cfg, &w.beacons[0], &p, blocked, &mut rng, 0.0).is_none());
    }

    #[test]
    fn draws_exactly_one_deviate_per_call() {
        let w = room();
        let cfg = PropagationConfig::default();
        let mut a = RngStream::new(3);
        let mut b = RngStream::new(3);
        let near = player(9, 10, Orientation::E);
        let mut far = player(0, 0, Orientation::W);
        far.floor = 0;
        predict_rss(&w, &cfg, &w.beacons[0], &near, CrowdAttenuation::CLEAR, &mut a, 0.0);
        let mut other = far.clone();
        other.transit_to = Some("x".into());
        predict_rss(&w, &cfg, &w.beacons[0], &other, CrowdAttenuation::CLEAR, &mut b, 0.0);
        assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
    }
}
