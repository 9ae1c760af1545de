use crate::rf::RssSample;
use crate::scanner::{window_stats, RssWindow, SampleBuffer, ScanConfig};
use crate::world::{PlayerState, World};

use super::floor::{floor_filter, update_active_floor, FilterDecision, FloorUpdate};
use super::messages::{MessageRenderer, MessageTable, RenderRequest};
use super::{FeedbackCategory, FeedbackError, FeedbackEvent, FeedbackThresholds, Observation, SeamStrategy, TrendTracker};

/// What one pipeline step produced.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    pub floor_update: Option<FloorUpdate>,
    /// Classification of the target's window, absent when the target is off
    /// the active floor or there is no target.
    pub observation: Option<Observation>,
    /// Rendered events in emission order.
    pub events: Vec<FeedbackEvent>,
    /// Windows of every venue beacon on the active floor, after filtering.
    pub windows: Vec<RssWindow>,
}

/// The quest the ghost is guiding towards.
#[derive(Debug, Clone, Copy)]
pub struct Target<'a> {
    pub ghost_id: &'a str,
    pub beacon_id: &'a str,
}

/// Windows, floor switching, classification and rendering for one session.
#[derive(Debug, Clone)]
pub struct FeedbackPipeline {
    pub thresholds: FeedbackThresholds,
    pub scan: ScanConfig,
    pub strategy: SeamStrategy,
    renderer: MessageRenderer,
    tracker: TrendTracker,
    active_floor: u32,
    tracked: Option<String>,
}

impl FeedbackPipeline {
    pub fn new(
        world: &World,
        thresholds: FeedbackThresholds,
        scan: ScanConfig,
        strategy: SeamStrategy,
        table: MessageTable,
        active_floor: u32,
    ) -> Self {
        let ghosts = world.artifacts.iter().map(|a| a.id.clone());
        Self {
            thresholds,
            scan,
            strategy,
            renderer: MessageRenderer::new(table, thresholds, ghosts),
            tracker: TrendTracker::default(),
            active_floor,
            tracked: None,
        }
    }

    pub fn active_floor(&self) -> u32 {
        self.active_floor
    }

    /// Used on arrival at a venue, where the entrance floor is known.
    pub fn reset_floor(&mut self, floor: u32) {
        self.active_floor = floor;
        self.tracker.reset();
    }

    pub fn process(
        &mut self,
        world: &World,
        buffer: &SampleBuffer,
        player: &PlayerState,
        target: Option<Target<'_>>,
        t_end_s: f64,
    ) -> Result<PipelineOutput, FeedbackError> {
        let mut out = PipelineOutput::default();
        if player.in_transit() {
            self.tracker.reset();
            return Ok(out);
        }
        if self.tracked.as_deref() != target.map(|t| t.beacon_id) {
            self.tracker.reset();
            self.tracked = target.map(|t| t.beacon_id.to_string());
        }
        let t_start = t_end_s - self.scan.window_span_s;
        let raw: Vec<RssSample> = buffer.iter().cloned().collect();
        let stair_windows: Vec<RssWindow> = world
            .beacons_in(&player.venue)
            .filter(|b| b.role != crate::world::BeaconRole::Artifact)
            .map(|b| window_stats(&raw, &b.id, t_start, t_end_s, self.scan.expected_samples(b.adv_rate_hz)))
            .collect();
        let update = update_active_floor(self.active_floor, &stair_windows, world, &self.thresholds);
        out.floor_update = Some(update);
        if update.switched {
            self.active_floor = update.floor;
            self.tracker.reset();
            if let Some(t) = target {
                let req = RenderRequest {
                    category: FeedbackCategory::FloorSwitched,
                    ghost_id: t.ghost_id,
                    strategy: self.strategy,
                    window: None,
                    delta_db: None,
                    timestamp_s: t_end_s,
                };
                out.events.extend(self.renderer.render_message(req)?);
            }
        }

        let kept: Vec<RssSample> = raw
            .into_iter()
            .filter(|s| floor_filter(self.active_floor, s, world) == FilterDecision::Keep)
            .collect();
        out.windows = world
            .beacons_in(&player.venue)
            .filter(|b| b.floor == self.active_floor)
            .map(|b| window_stats(&kept, &b.id, t_start, t_end_s, self.scan.expected_samples(b.adv_rate_hz)))
            .collect();

        let Some(t) = target else { return Ok(out) };
        let Some(window) = out.windows.iter().find(|w| w.beacon_id == t.beacon_id).cloned() else {
            // target is on another floor (or venue): no guidance at all
            self.tracker.reset();
            return Ok(out);
        };
        let obs = self.tracker.observe(window, player.orientation, &self.thresholds);
        let req = RenderRequest {
            category: obs.category,
            ghost_id: t.ghost_id,
            strategy: self.strategy,
            window: Some(&obs.window),
            delta_db: obs.delta_db,
            timestamp_s: t_end_s,
        };
        out.events.extend(self.renderer.render_message(req)?);
        out.observation = Some(obs);
        Ok(out)
    }
}
