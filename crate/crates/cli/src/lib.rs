//! `ghostsim` command line: batch simulation, fingerprint grid tools and the
//! session server.

pub mod serve;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ghostsim_core::harness::{compare_paradigms, measurement_route, run_batch, run_episode, Sweep};
use ghostsim_core::rf::{PhysicalEnv, SignalModel};
use ghostsim_core::scanner::tick;
use ghostsim_core::world::{load_world_file, FloorCell};
use ghostsim_core::*;

/// Overrides the fixture directory.
pub const FIXTURES_ENV: &str = "GHOSTSIM_FIXTURES";

pub fn fixture_dir() -> PathBuf {
    std::env::var_os(FIXTURES_ENV).map_or_else(default_fixture_dir, PathBuf::from)
}

#[derive(Debug, Parser)]
#[command(name = "ghostsim", version, about = "Seamful BLE museum game simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one agent over many seeds and write a per-episode report.
    Simulate(SimulateArgs),
    /// Walk a measurement route with a fingerprint grid replayed and check
    /// every window against the table.
    Replay(ReplayArgs),
    /// Check a fingerprint CSV against the schema.
    ValidateGrid(ValidateArgs),
    /// Print the raw samples a player would scan at one pose.
    ScanDump(ScanDumpArgs),
    /// Seamful versus seamless guidance over a noise by crowd sweep.
    Compare(CompareArgs),
    /// Run the session server over TCP and HTTP.
    Serve(serve::ServeArgs),
}

#[derive(Debug, Args)]
struct SignalArgs {
    /// Fingerprint grid to replay for one beacon, as BEACON=CSV.
    #[arg(long = "grid", value_name = "BEACON=CSV")]
    grids: Vec<String>,
    /// Noise standard deviation in dB.
    #[arg(long)]
    noise: Option<f64>,
    /// Crowd level: none, default or heavy.
    #[arg(long)]
    crowd: Option<String>,
    /// Disable noise and crowd.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Args)]
struct EpisodeArgs {
    /// World fixture name or path to a world JSON file.
    #[arg(long)]
    world: String,
    /// Artifact to search for; defaults to the first in the world.
    #[arg(long)]
    artifact: Option<String>,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// Step budget per episode; defaults to 4 * (width + height).
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long, default_value = "reports")]
    report_dir: PathBuf,
    #[command(flatten)]
    signal: SignalArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
    /// greedy, random or seamless.
    #[arg(long, default_value = "greedy")]
    agent: String,
    /// Feedback strategy: pessimistic, optimistic, cautious, opportunistic.
    #[arg(long)]
    strategy: Option<String>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    world: String,
    /// Grid to replay, as BEACON=CSV.
    #[arg(long, value_name = "BEACON=CSV")]
    grid: String,
    #[arg(long, default_value = "reports")]
    report_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Fingerprint CSV; bare names are also looked up in the fixture directory.
    file: String,
    /// Also check positions against this world.
    #[arg(long)]
    world: Option<String>,
    /// Beacon the grid belongs to, when checking against a world.
    #[arg(long)]
    beacon: Option<String>,
}

#[derive(Debug, Args)]
struct ScanDumpArgs {
    #[arg(long)]
    world: String,
    /// Defaults to the first venue.
    #[arg(long)]
    venue: Option<String>,
    #[arg(long, default_value_t = 0)]
    floor: u32,
    #[arg(long)]
    x: i32,
    #[arg(long)]
    y: i32,
    #[arg(long, default_value = "N")]
    facing: Orientation,
    #[arg(long, default_value_t = 5.0)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    signal: SignalArgs,
}

/// Runs the CLI with `args` (program name first) and returns the exit code.
/// Usage errors exit 2, failures exit 1.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a, out),
        Command::Replay(a) => replay(a, out),
        Command::ValidateGrid(a) => validate_grid(a, out),
        Command::ScanDump(a) => scan_dump(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Serve(a) => serve::run_blocking(a, out),
    }
}

/// A bare name resolves to `{fixtures}/{name}.{ext}`; anything that looks
/// like a path is used as is.
fn resolve(arg: &str, ext: &str) -> PathBuf {
    let p = Path::new(arg);
    if p.exists() || arg.contains(std::path::MAIN_SEPARATOR) || arg.contains('/') {
        return p.to_path_buf();
    }
    let dir = fixture_dir();
    if p.extension().is_some() { dir.join(arg) } else { dir.join(format!("{arg}.{ext}")) }
}

fn load_world(arg: &str) -> Result<World> {
    let path = resolve(arg, "json");
    load_world_file(&path).with_context(|| format!("loading {}", path.display()))
}

fn world_label(arg: &str) -> String {
    Path::new(arg).file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_grid(arg: &str) -> Result<FingerprintGrid> {
    let Some((beacon, file)) = arg.split_once('=') else { bail!("--grid expects BEACON=CSV, got {arg:?}") };
    let path = resolve(file, "csv");
    FingerprintGrid::from_csv_path(beacon, &path).with_context(|| format!("{}", path.display()))
}

fn signal_model(world: &World, a: &SignalArgs) -> Result<SignalModel> {
    let mut propagation = if a.deterministic { PropagationConfig::deterministic() } else { PropagationConfig::default() };
    if let Some(sigma) = a.noise {
        propagation.noise_sigma_db = sigma;
    }
    if let Some(level) = &a.crowd {
        let sweep = Sweep::standard();
        let Some(c) = sweep.crowds.iter().find(|c| &c.label == level) else {
            bail!("unknown crowd level {level:?}; expected none, default or heavy")
        };
        propagation.crowd = c.config.clone();
    }
    propagation.validate().context("propagation settings")?;
    let mut model = SignalModel::parametric(propagation);
    for arg in &a.grids {
        let grid = load_grid(arg)?;
        grid.check_against(world).map_err(anyhow::Error::msg).with_context(|| format!("grid {arg}"))?;
        model = model.with_replay(grid);
    }
    Ok(model)
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, raw: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::from(raw)).map_err(|_| anyhow::anyhow!("unknown {what} {raw:?}"))
}

fn default_budget(world: &World, config: &EpisodeConfig) -> Result<u32> {
    let artifact = match &config.target_artifact {
        Some(id) => world.artifact(id).with_context(|| format!("unknown artifact {id:?}"))?,
        None => world.artifacts.first().context("world has no artifacts")?,
    };
    let floor = world.floor(&artifact.venue, artifact.floor).context("artifact floor missing")?;
    Ok(4 * (floor.width + floor.height))
}

fn episode_setup(world: &World, a: &EpisodeArgs) -> Result<(EpisodeConfig, Vec<u64>, u32)> {
    let config = EpisodeConfig {
        signal: signal_model(world, &a.signal)?,
        target_artifact: a.artifact.clone(),
        ..EpisodeConfig::default()
    };
    if a.seeds == 0 {
        bail!("--seeds must be positive");
    }
    let seeds: Vec<u64> = (a.first_seed..a.first_seed + a.seeds).collect();
    let budget = match a.budget {
        Some(b) => b,
        None => default_budget(world, &config)?,
    };
    Ok((config, seeds, budget))
}

fn write_report(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let world = load_world(&a.episode.world)?;
    let (mut config, seeds, budget) = episode_setup(&world, &a.episode)?;
    if let Some(s) = &a.strategy {
        config.strategy = parse_enum("strategy", s)?;
    }
    let agent = match a.agent.as_str() {
        "greedy" => Agent::GreedyFollower,
        "random" => Agent::RandomWalker,
        "seamless" => {
            let venue = match &config.target_artifact {
                Some(id) => world.artifact(id).with_context(|| format!("unknown artifact {id:?}"))?.venue.clone(),
                None => world.artifacts.first().context("world has no artifacts")?.venue.clone(),
            };
            Agent::seamless(&world, &config.signal, &venue)
        }
        other => bail!("unknown agent {other:?}; expected greedy, random or seamless"),
    };
    let reports = run_batch(&world, &agent, &config, &seeds, budget)?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record([
        "seed",
        "found",
        "steps_taken",
        "time_to_find_s",
        "duration_s",
        "feedback_truth_agreement",
        "trend_events",
        "blackout_count",
        "realtime_deliveries",
        "popup_deliveries",
    ])?;
    for r in &reports {
        csv.write_record([
            r.seed.to_string(),
            r.found.to_string(),
            r.steps_taken.to_string(),
            r.time_to_find_s.map_or_else(String::new, |t| t.to_string()),
            r.duration_s.to_string(),
            r.feedback_truth_agreement.to_string(),
            r.trend_events.to_string(),
            r.blackout_count.to_string(),
            r.realtime_deliveries.to_string(),
            r.popup_deliveries.to_string(),
        ])?;
    }
    let csv = String::from_utf8(csv.into_inner()?)?;

    let found = reports.iter().filter(|r| r.found).count();
    let steps = median(reports.iter().filter(|r| r.found).map(|r| f64::from(r.steps_taken)).collect());
    let agreement = reports.iter().map(|r| r.feedback_truth_agreement).sum::<f64>() / reports.len() as f64;
    let summary = format!(
        "{} on {}: found {found}/{} ({:.3}), median steps to find {}, mean feedback agreement {agreement:.3}, budget {budget}\n",
        agent.name(),
        world_label(&a.episode.world),
        reports.len(),
        found as f64 / reports.len() as f64,
        steps.map_or_else(|| "-".to_string(), |s| format!("{s:.1}")),
    );
    let stem = format!("simulate-{}-{}", world_label(&a.episode.world), agent.name());
    let csv_path = write_report(&a.episode.report_dir, &format!("{stem}.csv"), &csv)?;
    let txt_path = write_report(&a.episode.report_dir, &format!("{stem}.txt"), &summary)?;
    write!(out, "{summary}")?;
    writeln!(out, "wrote {} and {}", csv_path.display(), txt_path.display())?;
    Ok(())
}

fn compare(a: CompareArgs, out: &mut dyn Write) -> Result<()> {
    let world = load_world(&a.episode.world)?;
    let (config, seeds, budget) = episode_setup(&world, &a.episode)?;
    let report = compare_paradigms(&world, &config, &Sweep::standard(), &seeds, budget)?;
    let table = report.to_text_table();
    let stem = format!("compare-{}", world_label(&a.episode.world));
    let csv_path = write_report(&a.episode.report_dir, &format!("{stem}.csv"), &report.to_csv())?;
    let txt_path = write_report(&a.episode.report_dir, &format!("{stem}.txt"), &table)?;
    write!(out, "{table}")?;
    writeln!(out, "wrote {} and {}", csv_path.display(), txt_path.display())?;
    Ok(())
}

fn validate_grid(a: ValidateArgs, out: &mut dyn Write) -> Result<()> {
    let path = resolve(&a.file, "csv");
    let beacon = a.beacon.clone().unwrap_or_else(|| "beacon".to_string());
    let grid = FingerprintGrid::from_csv_path(beacon, &path).with_context(|| format!("{}", path.display()))?;
    if let Some(w) = &a.world {
        let world = load_world(w)?;
        if a.beacon.is_none() {
            bail!("--world needs --beacon to know which beacon the grid belongs to");
        }
        grid.check_against(&world).map_err(anyhow::Error::msg).context("grid does not fit the world")?;
    }
    let s = grid.summary();
    writeln!(out, "ok: {} orientations × {} locations, {} readings", s.orientations, s.locations, s.readings)?;
    Ok(())
}

fn replay(a: ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let world = load_world(&a.world)?;
    let grid = load_grid(&a.grid)?;
    grid.check_against(&world).map_err(anyhow::Error::msg).context("grid does not fit the world")?;
    let beacon = world.beacon(&grid.beacon_id).context("beacon missing")?;
    let artifact = world
        .artifacts
        .iter()
        .find(|x| x.beacon_id == beacon.id)
        .with_context(|| format!("beacon {:?} is not attached to an artifact", beacon.id))?;
    let floor = world.floor(&beacon.venue, beacon.floor).context("beacon floor missing")?;
    let venue = world.venue(&beacon.venue).context("beacon venue missing")?;
    let start = if venue.entrance.floor == beacon.floor {
        venue.entrance.cell
    } else {
        grid.locations.values().find(|at| at.floor == beacon.floor).context("grid has no location on the beacon floor")?.cell
    };
    let route = measurement_route(floor, &grid, start);
    let config = EpisodeConfig {
        signal: SignalModel::parametric(PropagationConfig::deterministic()).with_replay(grid.clone()),
        target_artifact: Some(artifact.id.clone()),
        start: Some(PlayerState {
            venue: beacon.venue.clone(),
            floor: beacon.floor,
            cell: start,
            orientation: Orientation::N,
            clock_s: 0.0,
            transit_to: None,
        }),
        stop_on_found: false,
        ..EpisodeConfig::deterministic()
    };
    let r = run_episode(&world, &Agent::ScriptedWalk(route), &config, 0, u32::MAX / 8)?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["location_id", "x", "y", "floor", "orientation", "table_mean_dbm", "replayed_mean_dbm", "samples"])?;
    let (mut exact, mut silent, mut mismatches) = (0, 0, Vec::new());
    let mut seen = std::collections::BTreeSet::new();
    for obs in r.observations.iter().filter(|o| matches!(o.command, Some(MoveCommand::Turn(_)))) {
        let Some(id) = grid.location_at(FloorCell::new(obs.floor, obs.cell)) else { continue };
        if !seen.insert((id, obs.orientation)) {
            continue;
        }
        let window = obs.window.as_ref();
        let got = window.and_then(|w| w.mean_dbm);
        let expected = grid.get(id, obs.orientation).map(|x| x.mean_dbm);
        match (expected, got) {
            (Some(e), Some(g)) if e == g => exact += 1,
            (None, None) => silent += 1,
            _ => mismatches.push(format!("location {id} {}: table {expected:?}, replayed {got:?}", obs.orientation)),
        }
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        csv.write_record([
            id.to_string(),
            obs.cell.x.to_string(),
            obs.cell.y.to_string(),
            obs.floor.to_string(),
            obs.orientation.to_string(),
            opt(expected),
            opt(got),
            window.map_or(0, |w| w.n).to_string(),
        ])?;
    }
    let expected_cells = grid.locations.len() * Orientation::ALL.len();
    if seen.len() != expected_cells {
        mismatches.push(format!("route visited {} of {expected_cells} location/orientation pairs", seen.len()));
    }
    let csv = String::from_utf8(csv.into_inner()?)?;
    let path = write_report(&a.report_dir, &format!("replay-{}-{}.csv", world_label(&a.world), grid.beacon_id), &csv)?;
    writeln!(out, "replayed {exact} readings exactly, {silent} missing cells silent, {} mismatches", mismatches.len())?;
    writeln!(out, "wrote {}", path.display())?;
    if !mismatches.is_empty() {
        bail!("replay mismatch: {}", mismatches.join("; "));
    }
    Ok(())
}

fn scan_dump(a: ScanDumpArgs, out: &mut dyn Write) -> Result<()> {
    let world = load_world(&a.world)?;
    let model = signal_model(&world, &a.signal)?;
    let venue = match &a.venue {
        Some(v) => v.clone(),
        None => world.venues.first().context("world has no venues")?.id.clone(),
    };
    let player = PlayerState {
        venue,
        floor: a.floor,
        cell: Cell::new(a.x, a.y),
        orientation: a.facing,
        clock_s: 0.0,
        transit_to: None,
    };
    if !player.is_valid(&world) {
        bail!("({}, {}) on floor {} of {} is not an open cell", a.x, a.y, a.floor, player.venue);
    }
    if !(a.duration > 0.0 && a.duration.is_finite()) {
        bail!("--duration must be positive");
    }
    let mut env = PhysicalEnv::new(&world, a.seed);
    let samples = tick(&world, &model, &mut env, &player, 0.0, a.duration);
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["timestamp_s", "beacon_id", "rssi_dbm"])?;
    for s in samples {
        csv.write_record([s.timestamp_s.to_string(), s.beacon_id, s.rssi_dbm.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}
