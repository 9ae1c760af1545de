//! Acceptance suite. Prints one PASS/FAIL line per criterion, including its
//! wall time against the allowed budget, and exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use ghostsim_core::harness::{compare_paradigms, run_batch, run_episode, Sweep};
use ghostsim_core::rf::{mean_rss, replay_rss, PhysicalEnv, ReplayOutcome, SignalModel};
use ghostsim_core::scanner::window_stats;
use ghostsim_core::session::{CreateParams, MoveRequest, SessionCommand, SessionServer, WorldCatalog};
use ghostsim_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn fingerprint_fidelity() -> Check {
    let w = world("eastwing");
    let grid = east_wing_grid();
    let model = SignalModel::parametric(PropagationConfig::deterministic()).with_replay(grid.clone());
    let mut rng = RngStream::new(0);
    let (mut exact, mut silent) = (0, 0);
    for (&id, &at) in &grid.locations {
        for o in Orientation::ALL {
            let player = pose(EAST_WING, at.floor, at.cell, o);
            let direct = replay_rss(&grid, &player, true, &mut rng, 0.0);
            let via_env = PhysicalEnv::new(&w, 0).sample(&w, &model, 0, &player, 0.0);
            match grid.get(id, o) {
                Some(r) => {
                    ensure(matches!(&direct, ReplayOutcome::Sample(s) if s.rssi_dbm == r.mean_dbm), || {
                        format!("location {id} {o}: {direct:?} vs {}", r.mean_dbm)
                    })?;
                    ensure(via_env.as_ref().is_some_and(|s| s.rssi_dbm == r.mean_dbm), || {
                        format!("location {id} {o} through the environment: {via_env:?}")
                    })?;
                    exact += 1;
                }
                None => {
                    ensure(direct == ReplayOutcome::NoReading && via_env.is_none(), || format!("location {id} {o} not silent"))?;
                    silent += 1;
                }
            }
        }
    }
    ensure(exact == 347, || format!("{exact} readings"))?;
    Ok(format!("{exact} readings exact, {silent} missing cells silent"))
}

fn window_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ids = ["a", "b", "c"];
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let len = rng.random_range(0..120);
        let samples: Vec<RssSample> = (0..len)
            .map(|_| RssSample {
                beacon_id: ids[rng.random_range(0..3)].into(),
                timestamp_s: rng.random_range(0.0..10.0),
                rssi_dbm: rng.random_range(-100.0..0.0),
            })
            .collect();
        let t0: f64 = rng.random_range(0.0..8.0);
        let t1 = t0 + rng.random_range(0.5..5.0);
        let id = ids[rng.random_range(0..3)];
        let got = window_stats(&samples, id, t0, t1, 50);
        // Welford's running update over the raw slice
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for s in samples.iter().filter(|s| s.beacon_id == id && s.timestamp_s >= t0 && s.timestamp_s < t1) {
            n += 1;
            let d = s.rssi_dbm - mean;
            mean += d / n as f64;
            m2 += d * (s.rssi_dbm - mean);
        }
        ensure(got.n == n, || format!("count {} vs {n}", got.n))?;
        if n == 0 {
            ensure(got.mean_dbm.is_none() && got.sd_db.is_none(), || "empty window has stats".into())?;
            continue;
        }
        let sd = (m2 / n as f64).sqrt();
        let (gm, gs) = (got.mean_dbm.unwrap(), got.sd_db.unwrap());
        worst = worst.max((gm - mean).abs()).max((gs - sd).abs());
        ensure(worst <= 1e-9, || format!("deviation {worst:e}"))?;
    }
    Ok(format!("10000 streams, worst deviation {worst:.1e}"))
}

fn five_metre_range() -> Check {
    let cfg = PropagationConfig::deterministic();
    let mut checked = 0;
    for beacon in [Cell::new(10, 10), Cell::new(0, 0), Cell::new(19, 7)] {
        let w = World::open_room(20, 20, beacon).unwrap();
        let b = &w.beacons[0];
        for cell in w.floor("room", 0).unwrap().open_cells() {
            if w.distance_m(cell, beacon) > 5.0 {
                continue;
            }
            for o in Orientation::ALL {
                let rss = mean_rss(&w, &cfg, b, &pose("room", 0, cell, o));
                ensure(rss.is_some_and(|r| r >= cfg.detection_floor_dbm), || format!("{cell} {o}: {rss:?}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} poses within 5 m all detectable"))
}

fn orientation_ten_db() -> Check {
    let cfg = PropagationConfig::deterministic();
    let beacon = Cell::new(10, 10);
    let w = World::open_room(20, 20, beacon).unwrap();
    let b = &w.beacons[0];
    let mut checked = 0;
    for dir in Orientation::ALL {
        let (dx, dy) = dir.unit();
        for d in 1.. {
            let cell = Cell::new(beacon.x - dx * d, beacon.y - dy * d);
            if !w.floor("room", 0).unwrap().in_bounds(cell) {
                break;
            }
            let facing = mean_rss(&w, &cfg, b, &pose("room", 0, cell, dir));
            let back = mean_rss(&w, &cfg, b, &pose("room", 0, cell, dir.opposite()));
            let (Some(f), Some(k)) = (facing, back) else { return Err(format!("{cell}: undetectable")) };
            ensure((k - f + 10.0).abs() <= 1e-9, || format!("{cell}: back - facing = {}", k - f))?;
            checked += 1;
        }
    }
    Ok(format!("back minus facing = -10 dB at {checked} distances"))
}

fn floor_switch() -> Check {
    let w = world("twofloor");
    use MoveCommand::*;
    use Orientation::*;
    let script = vec![Step(E), Step(E), Step(E), Step(E), Step(E), Step(S), TakeStairs, Step(W), Step(E), TakeStairs, Step(W)];
    let mut summary = Vec::new();
    for target in ["clock", "globe"] {
        let config = EpisodeConfig {
            target_artifact: Some(target.into()),
            stop_on_found: false,
            ..EpisodeConfig::deterministic()
        };
        let r = run_episode(&w, &Agent::ScriptedWalk(script.clone()), &config, 0, 100).map_err(|e| e.to_string())?;
        let mut floors: Vec<u32> = r.observations.iter().map(|o| o.active_floor).collect();
        floors.dedup();
        ensure(floors == [0, 1, 0], || format!("{target}: active floors {floors:?}"))?;
        let target_floor = w.artifact(target).unwrap().floor;
        for o in r.observations.iter().filter(|o| o.active_floor != target_floor) {
            ensure(o.category.is_none(), || format!("{target}: feedback at t={} from off-floor beacon", o.t_end_s))?;
            let stray = r.events.iter().any(|e| e.timestamp_s == o.t_end_s && e.category != FeedbackCategory::FloorSwitched);
            ensure(!stray, || format!("{target}: event at t={} while off floor", o.t_end_s))?;
        }
        summary.push(format!("{target} 0->1->0"));
    }
    Ok(summary.join(", "))
}

fn convergence() -> Check {
    let mut episodes = 0u32;
    let mut worst = 0.0f64;
    for width in 1..=15 {
        for height in 1..=15 {
            let (mx, my) = (width - 1, height - 1);
            let mut targets = vec![Cell::new(0, 0), Cell::new(mx, 0), Cell::new(0, my), Cell::new(mx, my), Cell::new(mx / 2, my / 2)];
            targets.sort();
            targets.dedup();
            let budget = 4 * (width + height) as u32;
            for target in targets {
                let w = World::open_room(width as u32, height as u32, target).unwrap();
                for cell in w.floor("room", 0).unwrap().open_cells() {
                    let config = EpisodeConfig { start: Some(pose("room", 0, cell, Orientation::N)), ..EpisodeConfig::deterministic() };
                    let r = run_episode(&w, &Agent::GreedyFollower, &config, 0, budget).map_err(|e| e.to_string())?;
                    ensure(r.found, || format!("{width}x{height} target {target} start {cell}: not found"))?;
                    worst = worst.max(f64::from(r.steps_taken) / f64::from(budget));
                    episodes += 1;
                }
            }
        }
    }
    Ok(format!("{episodes} episodes all found, worst {:.0}% of budget", worst * 100.0))
}

/// Greedy success over 500 seeds on the East Wing with 3.2 dB noise and the
/// default crowd, measured on first run.
const FROZEN_SEAM_SUCCESS: f64 = 0.99;
const SEAM_TOLERANCE: f64 = 0.03;

fn seam_robustness() -> Check {
    let w = world("eastwing");
    let budget = 4 * (14 + 13);
    let seeds: Vec<u64> = (0..500).collect();
    let config = EpisodeConfig::default();
    let rs = run_batch(&w, &Agent::GreedyFollower, &config, &seeds, budget).map_err(|e| e.to_string())?;
    let rate = rs.iter().filter(|r| r.found).count() as f64 / rs.len() as f64;
    ensure((rate - FROZEN_SEAM_SUCCESS).abs() <= SEAM_TOLERANCE, || format!("success {rate:.3} vs frozen {FROZEN_SEAM_SUCCESS}"))?;

    // all stochastic terms off: every trend event must match the true distance change
    let mut clean = 0;
    let floor = w.floor(EAST_WING, 0).unwrap();
    for cell in floor.open_cells() {
        for o in Orientation::ALL {
            let config = EpisodeConfig { start: Some(pose(EAST_WING, 0, cell, o)), ..EpisodeConfig::deterministic() };
            let r = run_episode(&w, &Agent::GreedyFollower, &config, 0, budget).map_err(|e| e.to_string())?;
            ensure(r.feedback_truth_agreement == 1.0, || format!("{cell} {o}: agreement {}", r.feedback_truth_agreement))?;
            clean += 1;
        }
    }
    Ok(format!("success {rate:.3} (frozen {FROZEN_SEAM_SUCCESS} +/- {SEAM_TOLERANCE}), agreement 1.0 over {clean} noise-free starts"))
}

fn command_log() -> Vec<SessionCommand> {
    let w = world("cambridge");
    let quests: Vec<String> = w.artifacts.iter().map(|a| a.id.clone()).collect();
    let venues: Vec<String> = w.venues.iter().map(|v| v.id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let id = || "s1".to_string();
    let mut log = vec![SessionCommand::Create(CreateParams {
        world: "cambridge".into(),
        venue: None,
        mode: NotificationMode::Popup,
        seed: 42,
        strategy: SeamStrategy::Cautious,
        deterministic: false,
        debug: false,
    })];
    let dirs = Orientation::ALL;
    for _ in 0..400 {
        let roll = rng.random_range(0..100);
        let cmd = match roll {
            0..=54 => MoveRequest::Step { dir: dirs[rng.random_range(0..4)] },
            55..=62 => MoveRequest::Turn { dir: dirs[rng.random_range(0..4)] },
            63..=64 => MoveRequest::TakeStairs,
            65..=66 => MoveRequest::Transit { to_venue: venues[rng.random_range(0..venues.len())].clone() },
            67..=68 => MoveRequest::Arrive,
            69..=84 => {
                log.push(SessionCommand::Acknowledge { session_id: id() });
                continue;
            }
            85..=96 => {
                let quest_id = quests[rng.random_range(0..quests.len())].clone();
                log.push(SessionCommand::Answer { session_id: id(), quest_id, choice: rng.random_range(0..4) });
                continue;
            }
            _ => {
                log.push(SessionCommand::Snapshot { session_id: id() });
                continue;
            }
        };
        log.push(SessionCommand::Move { session_id: id(), command: cmd });
    }
    log
}

fn run_log(log: &[SessionCommand]) -> Vec<String> {
    let server = SessionServer::new(WorldCatalog::new(default_fixture_dir()));
    log.iter()
        .flat_map(|c| server.handle_command(c.clone()))
        .map(|e| serde_json::to_string(&e).expect("envelopes serialize"))
        .collect()
}

fn determinism() -> Check {
    let log = command_log();
    let first = run_log(&log);
    let second = std::thread::scope(|s| s.spawn(|| run_log(&log)).join().expect("replay thread"));
    ensure(first == second, || {
        let at = first.iter().zip(&second).position(|(a, b)| a != b).unwrap_or(first.len().min(second.len()));
        format!("logs diverge at envelope {at}")
    })?;
    let sequences: Vec<u64> = first
        .iter()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["sequence"].as_u64().unwrap())
        .collect();
    ensure(sequences.iter().zip(1..).all(|(&s, k)| s == k), || "sequence numbers have gaps".into())?;
    let bytes: usize = first.iter().map(String::len).sum();
    Ok(format!("{} commands, {} envelopes, {bytes} bytes identical", log.len(), first.len()))
}

fn comparison() -> Check {
    let w = world("gallery");
    let seeds: Vec<u64> = (0..20).collect();
    let sweep = Sweep::standard();
    let report = compare_paradigms(&w, &EpisodeConfig::default(), &sweep, &seeds, 4 * (12 + 10)).map_err(|e| e.to_string())?;
    ensure(report.cells.len() == 9, || format!("{} cells", report.cells.len()))?;
    for c in &report.cells {
        let label = format!("noise {} crowd {}", c.noise_sigma_db, c.crowd);
        ensure(c.episodes == seeds.len(), || format!("{label}: {} episodes", c.episodes))?;
        ensure(c.traces_matched, || format!("{label}: traces differ"))?;
        ensure(c.popup_below_realtime, || format!("{label}: popup not below realtime on some trace"))?;
        ensure(c.popup_events_per_min < c.realtime_events_per_min, || format!("{label}: popup rate not below realtime"))?;
        ensure(c.seamless_median_error_m.is_some(), || format!("{label}: no localization errors recorded"))?;
    }
    let clean = &report.cells[0];
    ensure(clean.seamless_median_error_m == Some(0.0), || "noise-free localization error is not zero".into())?;
    Ok(format!("3x3 sweep over {} seeds, popup < realtime on every trace", seeds.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fingerprint fidelity", Duration::from_secs(1), fingerprint_fidelity),
        ("windowing oracle", Duration::from_secs(5), window_oracle),
        ("5 m detection range", Duration::from_secs(1), five_metre_range),
        ("orientation -10 dB", Duration::from_secs(1), orientation_ten_db),
        ("floor switch protocol", Duration::from_secs(1), floor_switch),
        ("hot-cold convergence", Duration::from_secs(30), convergence),
        ("seam robustness", Duration::from_secs(120), seam_robustness),
        ("session determinism", Duration::from_secs(10), determinism),
        ("paradigm comparison", Duration::from_secs(120), comparison),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let verdict = match (&result, elapsed <= budget) {
            (Ok(_), true) => "PASS",
            _ => {
                failed += 1;
                "FAIL"
            }
        };
        let detail = match &result {
            Ok(d) => d.clone(),
            Err(e) => e.clone(),
        };
        println!("{verdict} {name}: {detail} [{:.2} s, limit {} s]", elapsed.as_secs_f64(), budget.as_secs());
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
