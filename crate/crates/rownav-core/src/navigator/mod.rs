//! Full-field state machine: row tracking, end-of-row approach on the back
//! camera, two 90° in-place turns and the perpendicular traverse between
//! corridors, iterated over a serpentine mission plan.
//!
//! The traverse carries an odometry cross-check against the expected row
//! spacing. It is a safeguard layered on top of the vision criterion: a
//! centering fire at an implausible traverse distance reads as a wrong-row
//! lock and faults instead of committing to the wrong corridor.

use crate::control::{
    extend_back_path, fit_reference, ControllerGains, PathFollower, VelocityCommand,
};
use crate::geometry::{image_path_to_bev, CameraId, CameraRig, GroundHomography, WorldPoint};
use crate::perception::{
    detect_row_end, extract_path, path_centering_offset, DepthProfile, DetectionInvalid,
    RunningMedian,
};
use crate::annotation::Heatmap;
use crate::simulator::{RowSegment, VineyardLayout};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five framework phases; transitions only follow the cycle
/// `0 → 1 → 2 → 3 → 4 → 0`, with any phase able to fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NavPhase {
    RowTracking,
    EndApproach,
    TurnOut,
    Traverse,
    TurnIn,
}

impl NavPhase {
    pub fn index(&self) -> u8 {
        match self {
            NavPhase::RowTracking => 0,
            NavPhase::EndApproach => 1,
            NavPhase::TurnOut => 2,
            NavPhase::Traverse => 3,
            NavPhase::TurnIn => 4,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(NavPhase::RowTracking),
            1 => Some(NavPhase::EndApproach),
            2 => Some(NavPhase::TurnOut),
            3 => Some(NavPhase::Traverse),
            4 => Some(NavPhase::TurnIn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
pub enum FaultReason {
    #[error("row-end detector never fired within the allowed overrun")]
    RowEndTimeout,
    #[error("in-place turn did not align within the allowed duration")]
    TurnTimeout,
    #[error("traverse exceeded the allowed travel without centering the next row")]
    TraverseTimeout,
    #[error("next-row lock is inconsistent with expected traverse distance")]
    WrongRow,
    #[error("path detection lost beyond the timeout")]
    DetectionLost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunState {
    Running,
    Completed,
    Faulted(FaultReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Left,
    Right,
}

impl TurnDirection {
    pub fn sign(&self) -> f64 {
        match self {
            TurnDirection::Left => 1.0,
            TurnDirection::Right => -1.0,
        }
    }

    /// The side camera facing the completed row during and after the turn.
    pub fn side_camera(&self) -> CameraId {
        match self {
            TurnDirection::Left => CameraId::Left,
            TurnDirection::Right => CameraId::Right,
        }
    }
}

/// One corridor to traverse, with its pre-surveyed endpoints in driving
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedRow {
    pub corridor: usize,
    pub start: WorldPoint,
    pub end: WorldPoint,
    /// Driven against the layout's segment orientation.
    pub reversed: bool,
}

impl PlannedRow {
    pub fn segment(&self) -> RowSegment {
        RowSegment::new(self.start, self.end)
    }

    pub fn direction(&self) -> f64 {
        self.segment().direction()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("mission plan has no rows")]
    Empty,
    #[error("corridor index {0} outside the layout")]
    BadCorridor(usize),
    #[error("rows {0} and {1} are not adjacent corridors")]
    NotAdjacent(usize, usize),
    #[error("planned endpoints disagree with the layout corridor {0}")]
    EndpointMismatch(usize),
}

/// Ordered corridors to traverse plus the row spacing used for traverse
/// cross-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    pub rows: Vec<PlannedRow>,
    pub row_spacing: f64,
}

impl MissionPlan {
    /// Serpentine plan over the given corridors (all of them when `None`),
    /// alternating driving direction, starting along the layout orientation.
    pub fn serpentine(layout: &VineyardLayout, corridors: Option<Vec<usize>>) -> Result<Self, PlanError> {
        let ids: Vec<usize> =
            corridors.unwrap_or_else(|| (0..layout.corridor_count()).collect());
        if ids.is_empty() {
            return Err(PlanError::Empty);
        }
        let mut rows = Vec::with_capacity(ids.len());
        for (k, &c) in ids.iter().enumerate() {
            if c >= layout.corridor_count() {
                return Err(PlanError::BadCorridor(c));
            }
            let seg = layout.corridor(c);
            let reversed = k % 2 == 1;
            let (start, end) = if reversed { (seg.end, seg.start) } else { (seg.start, seg.end) };
            rows.push(PlannedRow { corridor: c, start, end, reversed });
        }
        let plan = Self { rows, row_spacing: layout.row_spacing };
        plan.validate(layout)?;
        Ok(plan)
    }

    pub fn validate(&self, layout: &VineyardLayout) -> Result<(), PlanError> {
        if self.rows.is_empty() {
            return Err(PlanError::Empty);
        }
        for w in self.rows.windows(2) {
            let (a, b) = (w[0].corridor, w[1].corridor);
            if a.abs_diff(b) != 1 {
                return Err(PlanError::NotAdjacent(a, b));
            }
        }
        for row in &self.rows {
            if row.corridor >= layout.corridor_count() {
                return Err(PlanError::BadCorridor(row.corridor));
            }
            let seg = layout.corridor(row.corridor);
            let ok_fwd = row.start.planar_distance(&seg.start) < 1e-6
                && row.end.planar_distance(&seg.end) < 1e-6;
            let ok_rev = row.start.planar_distance(&seg.end) < 1e-6
                && row.end.planar_distance(&seg.start) < 1e-6;
            if !ok_fwd && !ok_rev {
                return Err(PlanError::EndpointMismatch(row.corridor));
            }
        }
        Ok(())
    }

    /// Turn direction leaving row `i` toward row `i + 1`.
    pub fn turn_direction(&self, i: usize) -> Option<TurnDirection> {
        let cur = self.rows.get(i)?;
        let next = self.rows.get(i + 1)?;
        let dir = cur.direction();
        let to_next = ((next.start.east + next.end.east) / 2.0 - cur.end.east,
                       (next.start.north + next.end.north) / 2.0 - cur.end.north);
        let cross = dir.cos() * to_next.1 - dir.sin() * to_next.0;
        Some(if cross > 0.0 { TurnDirection::Left } else { TurnDirection::Right })
    }
}

/// A low-cost GPS fix with meter-level accuracy, used only for the end-of-row
/// trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseGpsFix {
    pub position: WorldPoint,
    pub accuracy: f64,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("coarse GPS fix is stale")]
pub struct StaleGps;

/// Distance-to-endpoint threshold that arms row switching.
pub const END_TRIGGER_DISTANCE: f64 = 12.0;

/// True when the fix lies within `threshold` of the current row's far
/// endpoint. Fails with [`StaleGps`] for fixes older than 2 s, during which
/// the caller holds its state.
pub fn check_end_trigger(
    fix: &CoarseGpsFix,
    now: f64,
    row_end: &WorldPoint,
    threshold: f64,
) -> Result<bool, StaleGps> {
    if now - fix.timestamp > 2.0 {
        return Err(StaleGps);
    }
    Ok(fix.position.planar_distance(row_end) < threshold)
}

/// Navigator thresholds; defaults match the recorded design values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavigatorConfig {
    /// Coarse-GPS distance that arms row switching, meters.
    pub end_trigger_m: f64,
    /// Extraction confidence floor.
    pub min_confidence: f64,
    /// "In the center" threshold on the windowed mean of normalized
    /// centering offsets.
    pub center_band: f64,
    /// Offsets averaged over this many recent ticks before the centering
    /// test; averaging is what keeps single-frame detection noise from
    /// firing a transition early.
    pub center_window: usize,
    /// Side-depth jump ratio over the in-row baseline.
    pub jump_ratio: f64,
    /// In-place turn rate, rad/s.
    pub omega_turn: f64,
    /// Proportional gain from centering offset to turn rate.
    pub align_gain: f64,
    /// Turns time out at this multiple of the nominal 90° duration.
    pub turn_timeout_factor: f64,
    /// Inward-turn termination: windowed mean of the fitted path heading
    /// must fall inside this band, degrees.
    pub turn_in_heading_band_deg: f64,
    /// Proportional gain from fitted heading error to inward-turn rate.
    pub turn_in_gain: f64,
    /// End approach faults after travel beyond this multiple of the trigger
    /// distance.
    pub row_end_overrun_factor: f64,
    /// Traverse centering is armed after this fraction of the row spacing.
    pub traverse_arm_fraction: f64,
    /// Centering past this fraction of the spacing reads as a wrong-row lock.
    pub traverse_max_fraction: f64,
    /// Traverse faults after this multiple of the row spacing without
    /// centering.
    pub traverse_timeout_fraction: f64,
    /// Continuous detection loss tolerated before faulting, seconds.
    pub detection_loss_timeout_s: f64,
    /// Loss-of-detection command hold, seconds.
    pub hold_last_s: f64,
    /// BEV points beyond this range are discarded before fitting.
    pub bev_max_range: f64,
    /// Window (ticks) of the in-row side-depth running median.
    pub baseline_window: usize,
}

impl Default for NavigatorConfig {
    fn default() -> Self {
        Self {
            end_trigger_m: END_TRIGGER_DISTANCE,
            min_confidence: crate::perception::DEFAULT_MIN_CONFIDENCE,
            center_band: 0.018,
            center_window: 8,
            jump_ratio: 1.8,
            omega_turn: 0.5,
            align_gain: 3.0,
            turn_timeout_factor: 1.5,
            turn_in_heading_band_deg: 2.0,
            turn_in_gain: 4.0,
            // The coarse trigger often fires a few meters early (2 m-sigma
            // fixes against a 12 m threshold), so the end-approach budget
            // must absorb trigger noise plus the full trigger distance.
            row_end_overrun_factor: 2.0,
            traverse_arm_fraction: 0.6,
            traverse_max_fraction: 1.4,
            traverse_timeout_fraction: 2.0,
            detection_loss_timeout_s: 3.0,
            hold_last_s: 0.5,
            bev_max_range: 12.0,
            baseline_window: 45,
        }
    }
}

/// Sensor access contract for one control tick. Implementations must return
/// identical data for identical `(tick, camera)` requests.
pub trait SensorSuite {
    fn time(&self) -> f64;
    fn heatmap(&mut self, cam: CameraId) -> Result<Heatmap, DetectionInvalid>;
    fn side_depth(&mut self, cam: CameraId) -> DepthProfile;
    /// Latest coarse fix, if a new one arrived since the last call.
    fn coarse_fix(&mut self) -> Option<CoarseGpsFix>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PhaseChange,
    EndTrigger,
    RowEndDetected,
    TurnAligned,
    NextRowCentered,
    DetectionLost,
    DetectionRecovered,
    Fault,
    Completed,
    Intervention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavEvent {
    pub time: f64,
    pub phase: u8,
    pub kind: EventKind,
    pub detail: String,
}

struct CenteringState {
    instant: Option<f64>,
    centered: bool,
}

/// Output of one navigator tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub cmd: VelocityCommand,
    pub phase: NavPhase,
    /// Tracking errors when a reference was fitted this tick.
    pub errors: Option<(f64, f64)>,
    pub events: Vec<NavEvent>,
}

/// The synchronous state machine stepped at the perception rate.
pub struct Navigator {
    plan: MissionPlan,
    rig: CameraRig,
    cfg: NavigatorConfig,
    homographies: [GroundHomography; 4],
    follower: PathFollower,
    phase: NavPhase,
    state: RunState,
    row_index: usize,
    rows_completed: usize,
    trigger_latched: bool,
    last_fix: Option<CoarseGpsFix>,
    baseline: RunningMedian,
    phase_time: f64,
    phase_travel: f64,
    offsets: std::collections::VecDeque<f64>,
    detection_lost_reported: bool,
    turn_direction: TurnDirection,
}

impl Navigator {
    pub fn new(plan: MissionPlan, rig: CameraRig, cfg: NavigatorConfig, gains: ControllerGains) -> Self {
        let homographies = [
            GroundHomography::local(&rig.front).expect("front homography"),
            GroundHomography::local(&rig.back).expect("back homography"),
            GroundHomography::local(&rig.left).expect("left homography"),
            GroundHomography::local(&rig.right).expect("right homography"),
        ];
        let turn_direction = plan.turn_direction(0).unwrap_or(TurnDirection::Left);
        let baseline_window = cfg.baseline_window;
        let hold = cfg.hold_last_s;
        Self {
            plan,
            rig,
            cfg,
            homographies,
            follower: PathFollower::new(gains, hold),
            phase: NavPhase::RowTracking,
            state: RunState::Running,
            row_index: 0,
            rows_completed: 0,
            trigger_latched: false,
            last_fix: None,
            baseline: RunningMedian::new(baseline_window),
            phase_time: 0.0,
            phase_travel: 0.0,
            offsets: std::collections::VecDeque::new(),
            detection_lost_reported: false,
            turn_direction,
        }
    }

    pub fn phase(&self) -> NavPhase {
        self.phase
    }

    pub fn state(&self) -> RunState {
        self.state
    }

    pub fn current_row(&self) -> usize {
        self.row_index
    }

    pub fn rows_completed(&self) -> usize {
        self.rows_completed
    }

    pub fn plan(&self) -> &MissionPlan {
        &self.plan
    }

    fn homography(&self, cam: CameraId) -> &GroundHomography {
        match cam {
            CameraId::Front => &self.homographies[0],
            CameraId::Back => &self.homographies[1],
            CameraId::Left => &self.homographies[2],
            CameraId::Right => &self.homographies[3],
        }
    }

    fn current_planned(&self) -> &PlannedRow {
        &self.plan.rows[self.row_index]
    }

    fn heatmap_width(&self, cam: CameraId) -> u32 {
        self.rig.get(cam).heatmap_size().0
    }

    /// Extraction + BEV conversion + line fit for one camera, as tracking
    /// errors at the look-ahead station.
    fn tracking_errors(
        &self,
        sensors: &mut dyn SensorSuite,
        cam: CameraId,
        extend_rear: bool,
    ) -> Option<(f64, f64)> {
        let hm = sensors.heatmap(cam).ok()?;
        let path = extract_path(&hm, self.cfg.min_confidence, cam).ok()?;
        let full = path.image_points_scaled(1.0 / crate::annotation::HEATMAP_SCALE);
        let ground =
            image_path_to_bev(&full, self.homography(cam), self.cfg.bev_max_range).ok()?;
        let lookahead = self.follower.gains().lookahead_d;
        let fit = if extend_rear {
            extend_back_path(&ground, lookahead).ok()?
        } else {
            fit_reference(&ground, lookahead).ok()?
        };
        Some((fit.e_y, fit.e_theta))
    }

    /// Normalized centering offset of the detected path on one camera.
    fn centering_offset(&self, sensors: &mut dyn SensorSuite, cam: CameraId) -> Option<f64> {
        let hm = sensors.heatmap(cam).ok()?;
        let path = extract_path(&hm, self.cfg.min_confidence, cam).ok()?;
        Some(path_centering_offset(&path, self.heatmap_width(cam)))
    }

    fn event(&self, now: f64, kind: EventKind, detail: impl Into<String>) -> NavEvent {
        NavEvent { time: now, phase: self.phase.index(), kind, detail: detail.into() }
    }

    fn enter_phase(&mut self, phase: NavPhase, now: f64, events: &mut Vec<NavEvent>) {
        events.push(self.event(
            now,
            EventKind::PhaseChange,
            format!("{} -> {}", self.phase.index(), phase.index()),
        ));
        self.phase = phase;
        self.phase_time = 0.0;
        self.phase_travel = 0.0;
        self.offsets.clear();
        self.follower.reset();
    }

    fn centering_update(&mut self, offset: Option<f64>) -> CenteringState {
        self.centering_update_with_band(offset, self.cfg.center_band)
    }

    /// Push one centering observation. Steering uses the instantaneous
    /// offset (a lagged signal would overshoot the alignment); the centered
    /// decision uses the mean over a full window, which suppresses
    /// single-frame detection noise.
    fn centering_update_with_band(&mut self, offset: Option<f64>, band: f64) -> CenteringState {
        match offset {
            Some(o) => {
                // A discontinuous jump means the detector re-locked onto a
                // different row; stale samples must not blend across it.
                if let Some(last) = self.offsets.back() {
                    if (o - last).abs() > 0.35 {
                        self.offsets.clear();
                    }
                }
                if self.offsets.len() == self.cfg.center_window {
                    self.offsets.pop_front();
                }
                self.offsets.push_back(o);
            }
            // A missing observation ages the window out one sample rather
            // than discarding the whole history.
            None => {
                self.offsets.pop_front();
            }
        }
        if self.offsets.is_empty() {
            return CenteringState { instant: None, centered: false };
        }
        let mean = self.offsets.iter().sum::<f64>() / self.offsets.len() as f64;
        CenteringState {
            instant: offset,
            centered: self.offsets.len() == self.cfg.center_window && mean.abs() < band,
        }
    }

    fn fault(&mut self, reason: FaultReason, now: f64, events: &mut Vec<NavEvent>) {
        events.push(self.event(now, EventKind::Fault, reason.to_string()));
        self.state = RunState::Faulted(reason);
    }

    /// Advance past a faulted switch as an external intervention would:
    /// resume tracking at the head of the next planned row.
    pub fn force_advance(&mut self, now: f64) -> Vec<NavEvent> {
        let mut events =
            vec![self.event(now, EventKind::Intervention, "manual reposition to next row")];
        if self.row_index + 1 < self.plan.rows.len() {
            self.row_index += 1;
            self.state = RunState::Running;
            self.trigger_latched = false;
            self.detection_lost_reported = false;
            if let Some(dir) = self.plan.turn_direction(self.row_index) {
                self.turn_direction = dir;
            }
            self.enter_phase(NavPhase::RowTracking, now, &mut events);
        } else {
            self.rows_completed = self.plan.rows.len();
            self.state = RunState::Completed;
            events.push(self.event(now, EventKind::Completed, "mission ended by intervention"));
        }
        events
    }

    /// One control tick at the perception rate.
    pub fn step(&mut self, sensors: &mut dyn SensorSuite, dt: f64) -> StepOutput {
        let now = sensors.time();
        let mut events = Vec::new();
        if !matches!(self.state, RunState::Running) {
            return StepOutput {
                cmd: VelocityCommand::stop(),
                phase: self.phase,
                errors: None,
                events,
            };
        }
        self.phase_time += dt;
        if let Some(fix) = sensors.coarse_fix() {
            self.last_fix = Some(fix);
        }

        let mut errors = None;
        let cmd = match self.phase {
            NavPhase::RowTracking => self.step_row_tracking(sensors, dt, now, &mut events, &mut errors),
            NavPhase::EndApproach => self.step_end_approach(sensors, dt, now, &mut events, &mut errors),
            NavPhase::TurnOut => self.step_turn(sensors, dt, now, &mut events, false),
            NavPhase::Traverse => self.step_traverse(sensors, dt, now, &mut events),
            NavPhase::TurnIn => self.step_turn(sensors, dt, now, &mut events, true),
        };
        self.phase_travel += cmd.v.abs() * dt;
        StepOutput { cmd, phase: self.phase, errors, events }
    }

    fn step_row_tracking(
        &mut self,
        sensors: &mut dyn SensorSuite,
        dt: f64,
        now: f64,
        events: &mut Vec<NavEvent>,
        errors_out: &mut Option<(f64, f64)>,
    ) -> VelocityCommand {
        // Maintain the in-row side-depth baseline for the upcoming switch.
        let side_cam = self.turn_direction.side_camera();
        if let Some(robust) = sensors.side_depth(side_cam).robust_depth() {
            self.baseline.push(robust);
        }

        let meas = self.tracking_errors(sensors, CameraId::Front, false);
        *errors_out = meas;
        let out = self.follower.update(meas, dt);
        self.report_detection(out.lost, now, events);
        if self.follower.loss_elapsed() > self.cfg.detection_loss_timeout_s {
            self.fault(FaultReason::DetectionLost, now, events);
            return VelocityCommand::stop();
        }

        if !self.trigger_latched {
            if let Some(fix) = &self.last_fix {
                let end = self.current_planned().end;
                if let Ok(true) = check_end_trigger(fix, now, &end, self.cfg.end_trigger_m) {
                    self.trigger_latched = true;
                    self.rows_completed += 1;
                    events.push(self.event(
                        now,
                        EventKind::EndTrigger,
                        format!("row {} end within {} m", self.row_index, self.cfg.end_trigger_m),
                    ));
                    if self.row_index + 1 >= self.plan.rows.len() {
                        events.push(self.event(now, EventKind::Completed, "final row reached"));
                        self.state = RunState::Completed;
                        return VelocityCommand::stop();
                    }
                    self.enter_phase(NavPhase::EndApproach, now, events);
                }
            }
        }
        out.cmd
    }

    fn step_end_approach(
        &mut self,
        sensors: &mut dyn SensorSuite,
        dt: f64,
        now: f64,
        events: &mut Vec<NavEvent>,
        errors_out: &mut Option<(f64, f64)>,
    ) -> VelocityCommand {
        let meas = self.tracking_errors(sensors, CameraId::Back, true);
        *errors_out = meas;
        let out = self.follower.update(meas, dt);
        self.report_detection(out.lost, now, events);
        if self.follower.loss_elapsed() > self.cfg.detection_loss_timeout_s {
            self.fault(FaultReason::DetectionLost, now, events);
            return VelocityCommand::stop();
        }

        let side_cam = self.turn_direction.side_camera();
        let profile = sensors.side_depth(side_cam);
        let baseline = self.baseline.median().unwrap_or(self.plan.row_spacing / 2.0);
        if let Ok(true) = detect_row_end(&profile, baseline, self.cfg.jump_ratio) {
            events.push(self.event(now, EventKind::RowEndDetected, format!("baseline {baseline:.2} m")));
            self.enter_phase(NavPhase::TurnOut, now, events);
            return VelocityCommand::stop();
        }

        if self.phase_travel > self.cfg.end_trigger_m * self.cfg.row_end_overrun_factor {
            self.fault(FaultReason::RowEndTimeout, now, events);
            return VelocityCommand::stop();
        }
        out.cmd
    }

    /// Shared by both in-place turns.
    ///
    /// The outward turn centers the completed row in the side camera. The
    /// inward turn regulates the fitted path heading of the front camera
    /// instead: after the traverse the robot carries a lateral offset, and a
    /// column-centering criterion would trade that offset into a heading
    /// bias; the fit decouples the two.
    fn step_turn(
        &mut self,
        sensors: &mut dyn SensorSuite,
        _dt: f64,
        now: f64,
        events: &mut Vec<NavEvent>,
        inward: bool,
    ) -> VelocityCommand {
        let timeout = self.cfg.turn_timeout_factor * (std::f64::consts::FRAC_PI_2 / self.cfg.omega_turn);
        if self.phase_time > timeout {
            self.fault(FaultReason::TurnTimeout, now, events);
            return VelocityCommand::stop();
        }

        let (signal, gain, band) = if inward {
            (
                // Negated so the shared law `omega = -gain * signal` rotates
                // toward the path: positive e_theta means the path points
                // left of the robot's forward axis.
                self.tracking_errors(sensors, CameraId::Front, false).map(|(_, e_theta)| -e_theta),
                self.cfg.turn_in_gain,
                self.cfg.turn_in_heading_band_deg.to_radians(),
            )
        } else {
            (
                self.centering_offset(sensors, self.turn_direction.side_camera()),
                self.cfg.align_gain,
                self.cfg.center_band,
            )
        };
        let centering = self.centering_update_with_band(signal, band);
        if centering.centered {
            if inward {
                events.push(self.event(now, EventKind::TurnAligned, "aligned with next row"));
                self.advance_row(now, events);
            } else {
                events.push(self.event(now, EventKind::TurnAligned, "aligned with completed row"));
                self.enter_phase(NavPhase::Traverse, now, events);
            }
            return VelocityCommand::stop();
        }
        let omega = match centering.instant {
            Some(o) => (-gain * o).clamp(-self.cfg.omega_turn, self.cfg.omega_turn),
            None => self.turn_direction.sign() * self.cfg.omega_turn,
        };
        VelocityCommand { v: 0.0, omega }
    }

    fn step_traverse(
        &mut self,
        sensors: &mut dyn SensorSuite,
        _dt: f64,
        now: f64,
        events: &mut Vec<NavEvent>,
    ) -> VelocityCommand {
        let spacing = self.plan.row_spacing;
        if self.phase_travel > self.cfg.traverse_timeout_fraction * spacing {
            self.fault(FaultReason::TraverseTimeout, now, events);
            return VelocityCommand::stop();
        }

        let armed = self.phase_travel >= self.cfg.traverse_arm_fraction * spacing;
        let cam = self.turn_direction.side_camera();
        let offset = self.centering_offset(sensors, cam);
        let centering = self.centering_update(offset);
        if centering.centered && armed {
            if self.phase_travel > self.cfg.traverse_max_fraction * spacing {
                self.fault(FaultReason::WrongRow, now, events);
                return VelocityCommand::stop();
            }
            events.push(self.event(
                now,
                EventKind::NextRowCentered,
                format!("traverse {:.2} m", self.phase_travel),
            ));
            self.enter_phase(NavPhase::TurnIn, now, events);
            return VelocityCommand::stop();
        }
        VelocityCommand { v: self.follower.gains().v_nominal, omega: 0.0 }
    }

    fn advance_row(&mut self, now: f64, events: &mut Vec<NavEvent>) {
        self.row_index += 1;
        self.trigger_latched = false;
        self.detection_lost_reported = false;
        self.baseline = RunningMedian::new(self.cfg.baseline_window);
        if let Some(dir) = self.plan.turn_direction(self.row_index) {
            self.turn_direction = dir;
        }
        self.enter_phase(NavPhase::RowTracking, now, events);
    }

    fn report_detection(&mut self, lost: bool, now: f64, events: &mut Vec<NavEvent>) {
        if lost && !self.detection_lost_reported && self.follower.loss_elapsed() > self.cfg.hold_last_s {
            self.detection_lost_reported = true;
            events.push(self.event(now, EventKind::DetectionLost, "holding, then stopping"));
        } else if !lost && self.detection_lost_reported {
            self.detection_lost_reported = false;
            events.push(self.event(now, EventKind::DetectionRecovered, "tracking resumed"));
        }
    }
}
