//! Fixed-step trial runner: perception and control at 15 Hz, GPS at 10 Hz,
//! all randomness from one seed, logs bit-reproducible.

use super::{
    integrate, sample_gps_coarse, sample_gps_rtk, sample_side_depth, NoiseSpec, RobotState,
    VineyardLayout,
};
use crate::annotation::Heatmap;
use crate::control::{ControllerGains, VelocityCommand};
use crate::geometry::{CameraId, CameraRig, CameraSpec, WorldPose};
use crate::navigator::{
    CoarseGpsFix, EventKind, MissionPlan, NavEvent, Navigator, NavigatorConfig, RunState,
    SensorSuite,
};
use crate::perception::{
    DepthProfile, DetectionInvalid, HeatmapProvider, Observation, SyntheticHeatmapProvider,
};
use crate::simulator::RtkFix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::path::Path;

pub const CONTROL_RATE_HZ: f64 = 15.0;
pub const GPS_RATE_HZ: f64 = 10.0;

const DT: f64 = 1.0 / CONTROL_RATE_HZ;

/// Scripted perturbation active over `[from, until)` seconds of trial time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub from: f64,
    pub until: f64,
    #[serde(flatten)]
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScriptAction {
    /// Manual-override style steering bias added to the commanded rate.
    HeadingBias { omega: f64 },
    /// Force dropouts on one camera (or all when unset).
    Dropout { camera: Option<CameraId> },
    /// Scale detection noise (ditch / vacancy style degradation).
    NoiseScale { factor: f64 },
    /// Clamp side depth to in-row values so the row-end detector stays quiet.
    SuppressRowEnd,
    /// Hide a corridor from the detector (wrong-row lock injection).
    ExcludeCorridor { corridor: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub events: Vec<ScriptEvent>,
}

impl Script {
    fn active(&self, t: f64) -> impl Iterator<Item = &ScriptEvent> {
        self.events.iter().filter(move |e| t >= e.from && t < e.until)
    }
}

/// Everything a trial needs, fully resolved.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub layout: VineyardLayout,
    pub plan: MissionPlan,
    pub noise: NoiseSpec,
    pub gains: ControllerGains,
    pub nav: NavigatorConfig,
    pub script: Script,
    pub seed: u64,
    pub max_duration: f64,
    /// Abort on the first fault instead of simulating an intervention.
    pub strict: bool,
    /// Overrides the default start at the first planned row's head (e.g. to
    /// begin with a deliberate offset).
    pub start_pose: Option<WorldPose>,
}

impl TrialSetup {
    pub fn new(layout: VineyardLayout, plan: MissionPlan, seed: u64) -> Self {
        let max_duration = default_duration(&layout, &plan);
        Self {
            layout,
            plan,
            noise: NoiseSpec::default(),
            gains: ControllerGains::default(),
            nav: NavigatorConfig::default(),
            script: Script::default(),
            seed,
            max_duration,
            strict: false,
            start_pose: None,
        }
    }
}

/// Generous time limit: per-row travel plus switching budget, times 1.5.
pub fn default_duration(layout: &VineyardLayout, plan: &MissionPlan) -> f64 {
    let row_len = layout.rows.first().map(|r| r.length()).unwrap_or(100.0);
    let per_row = row_len / 0.8 + 60.0;
    (plan.rows.len() as f64 * per_row) * 1.5
}

/// One 15 Hz sample of the trial state log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub time: f64,
    pub east: f64,
    pub north: f64,
    pub heading: f64,
    pub v_cmd: f64,
    pub omega_cmd: f64,
    pub phase: u8,
}

/// One controller sample (errors absent when detection was lost).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandRow {
    pub time: f64,
    pub v: f64,
    pub omega: f64,
    pub e_y: Option<f64>,
    pub e_theta: Option<f64>,
}

/// Complete record of one trial.
#[derive(Debug, Clone)]
pub struct TrialLog {
    pub layout_name: String,
    pub seed: u64,
    pub rows: Vec<LogRow>,
    pub commands: Vec<CommandRow>,
    pub rtk: Vec<RtkFix>,
    pub coarse: Vec<CoarseGpsFix>,
    /// 10 Hz true poses, the GNSS-IMU stand-in used for annotation logs.
    pub gnss_poses: Vec<(f64, WorldPose)>,
    pub events: Vec<NavEvent>,
    pub completed: bool,
    pub interventions: u32,
    pub rows_completed: usize,
}

struct Providers {
    front: SyntheticHeatmapProvider,
    back: SyntheticHeatmapProvider,
    left: SyntheticHeatmapProvider,
    right: SyntheticHeatmapProvider,
}

impl Providers {
    fn get(&self, id: CameraId) -> &SyntheticHeatmapProvider {
        match id {
            CameraId::Front => &self.front,
            CameraId::Back => &self.back,
            CameraId::Left => &self.left,
            CameraId::Right => &self.right,
        }
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut SyntheticHeatmapProvider)) {
        f(&mut self.front);
        f(&mut self.back);
        f(&mut self.left);
        f(&mut self.right);
    }
}

struct SimSensors<'a> {
    time: f64,
    tick: u64,
    pose: WorldPose,
    providers: &'a Providers,
    left_depth: DepthProfile,
    right_depth: DepthProfile,
    pending_fix: Option<CoarseGpsFix>,
}

impl SensorSuite for SimSensors<'_> {
    fn time(&self) -> f64 {
        self.time
    }

    fn heatmap(&mut self, cam: CameraId) -> Result<Heatmap, DetectionInvalid> {
        let obs = Observation { time: self.time, tick: self.tick, pose: self.pose };
        self.providers.get(cam).heatmap(&obs)
    }

    fn side_depth(&mut self, cam: CameraId) -> DepthProfile {
        match cam {
            CameraId::Left => self.left_depth.clone(),
            CameraId::Right => self.right_depth.clone(),
            other => panic!("no depth stream on camera {other:?}"),
        }
    }

    fn coarse_fix(&mut self) -> Option<CoarseGpsFix> {
        self.pending_fix.take()
    }
}

/// Run one trial to completion, fault-abort or time limit.
pub fn run_trial(setup: &TrialSetup) -> TrialLog {
    setup.layout.validate().expect("valid layout");
    setup.plan.validate(&setup.layout).expect("plan consistent with layout");
    setup.noise.validate().expect("valid noise spec");
    setup.gains.validate().expect("valid gains");

    let rig = CameraRig::default();
    let mut master = ChaCha8Rng::seed_from_u64(setup.seed ^ setup.noise.seed);
    let gps_seed: u64 = master.random();
    let depth_seed: u64 = master.random();
    let heatmap_seed: u64 = master.random();
    let mut gps_rng = ChaCha8Rng::seed_from_u64(gps_seed);
    let mut depth_rng = ChaCha8Rng::seed_from_u64(depth_seed);

    let mut providers = Providers {
        front: SyntheticHeatmapProvider::new(
            CameraId::Front,
            rig.front.clone(),
            setup.layout.clone(),
            setup.noise.clone(),
            heatmap_seed,
        ),
        back: SyntheticHeatmapProvider::new(
            CameraId::Back,
            rig.back.clone(),
            setup.layout.clone(),
            setup.noise.clone(),
            heatmap_seed,
        ),
        left: SyntheticHeatmapProvider::new(
            CameraId::Left,
            rig.left.clone(),
            setup.layout.clone(),
            setup.noise.clone(),
            heatmap_seed,
        ),
        right: SyntheticHeatmapProvider::new(
            CameraId::Right,
            rig.right.clone(),
            setup.layout.clone(),
            setup.noise.clone(),
            heatmap_seed,
        ),
    };

    let first = &setup.plan.rows[0];
    let start_pose = setup
        .start_pose
        .unwrap_or_else(|| WorldPose::new(first.start, first.direction(), 0.0, 0.0));
    let mut state = RobotState::at(start_pose);
    let mut navigator =
        Navigator::new(setup.plan.clone(), rig.clone(), setup.nav.clone(), setup.gains);

    let mut log = TrialLog {
        layout_name: setup.layout.name.clone(),
        seed: setup.seed,
        rows: Vec::new(),
        commands: Vec::new(),
        rtk: Vec::new(),
        coarse: Vec::new(),
        gnss_poses: Vec::new(),
        events: Vec::new(),
        completed: false,
        interventions: 0,
        rows_completed: 0,
    };

    let mut tick: u64 = 0;
    let mut next_gps: u64 = 0;
    loop {
        let t = tick as f64 * DT;
        if t > setup.max_duration {
            log.events.push(NavEvent {
                time: t,
                phase: navigator.phase().index(),
                kind: EventKind::Fault,
                detail: "simulation time limit".into(),
            });
            break;
        }

        // Script windows active this tick.
        let mut heading_bias = 0.0;
        let mut suppress_row_end = false;
        let mut dropout_all = false;
        let mut dropout_cam: Option<CameraId> = None;
        let mut noise_scale = 1.0;
        let mut excluded: Option<usize> = None;
        for ev in setup.script.active(t) {
            match &ev.action {
                ScriptAction::HeadingBias { omega } => heading_bias += omega,
                ScriptAction::Dropout { camera: Some(c) } => dropout_cam = Some(*c),
                ScriptAction::Dropout { camera: None } => dropout_all = true,
                ScriptAction::NoiseScale { factor } => noise_scale *= factor,
                ScriptAction::SuppressRowEnd => suppress_row_end = true,
                ScriptAction::ExcludeCorridor { corridor } => excluded = Some(*corridor),
            }
        }
        providers.for_each_mut(|p| {
            let id = p.camera();
            let opts = p.options_mut();
            opts.force_dropout = dropout_all || dropout_cam == Some(id);
            opts.noise_scale = noise_scale;
            opts.excluded_corridor = excluded;
        });

        // GPS at 10 Hz with exactly spaced timestamps; order fixed: rtk then
        // coarse.
        let mut pending_fix = None;
        if (next_gps as f64) / GPS_RATE_HZ <= t + 1e-9 {
            let ts = next_gps as f64 / GPS_RATE_HZ;
            let rtk = sample_gps_rtk(&state, ts, &setup.noise, &mut gps_rng);
            let coarse = sample_gps_coarse(&state, ts, &setup.noise, &mut gps_rng);
            log.rtk.push(rtk);
            log.coarse.push(coarse);
            log.gnss_poses.push((ts, state.pose));
            pending_fix = Some(coarse);
            next_gps += 1;
        }

        // Depth fans for both sides every tick, fixed order.
        let mut left_depth = sample_side_depth(
            &state,
            &setup.layout,
            &rig.left,
            CameraId::Left,
            &setup.noise,
            &mut depth_rng,
        );
        let mut right_depth = sample_side_depth(
            &state,
            &setup.layout,
            &rig.right,
            CameraId::Right,
            &setup.noise,
            &mut depth_rng,
        );
        if suppress_row_end {
            let clamp = setup.layout.row_spacing * 0.6;
            for s in left_depth.samples.iter_mut().chain(right_depth.samples.iter_mut()) {
                s.depth = s.depth.map(|d| d.min(clamp));
            }
        }

        let mut sensors = SimSensors {
            time: t,
            tick,
            pose: state.pose,
            providers: &providers,
            left_depth,
            right_depth,
            pending_fix,
        };
        let out = navigator.step(&mut sensors, DT);
        log.events.extend(out.events.iter().cloned());

        let mut cmd = out.cmd;
        if heading_bias != 0.0 {
            cmd = VelocityCommand {
                v: cmd.v,
                omega: (cmd.omega + heading_bias)
                    .clamp(-setup.gains.omega_max, setup.gains.omega_max),
            };
        }

        log.rows.push(LogRow {
            time: t,
            east: state.pose.position.east,
            north: state.pose.position.north,
            heading: state.pose.heading,
            v_cmd: cmd.v,
            omega_cmd: cmd.omega,
            phase: out.phase.index(),
        });
        log.commands.push(CommandRow {
            time: t,
            v: cmd.v,
            omega: cmd.omega,
            e_y: out.errors.map(|e| e.0),
            e_theta: out.errors.map(|e| e.1),
        });

        match navigator.state() {
            RunState::Completed => {
                log.completed = true;
                break;
            }
            RunState::Faulted(_) => {
                if setup.strict {
                    break;
                }
                log.interventions += 1;
                log.events.extend(navigator.force_advance(t));
                if matches!(navigator.state(), RunState::Completed) {
                    log.completed = true;
                    break;
                }
                // Reposition at the head of the resumed row, as the operator
                // would.
                let row = &navigator.plan().rows[navigator.current_row()];
                state = RobotState {
                    pose: WorldPose::new(row.start, row.segment().direction(), 0.0, 0.0),
                    v: 0.0,
                    omega: 0.0,
                    time: state.time,
                };
                tick += 1;
                continue;
            }
            RunState::Running => {}
        }

        state = integrate(&state, &cmd, DT);
        tick += 1;
    }

    log.rows_completed = navigator.rows_completed();
    log
}

// --- Log file formats -------------------------------------------------------

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

/// Write the trial log set: trial.csv, commands.csv, rtk.csv, coarse.csv,
/// events.jsonl, plan.json and meta.json.
pub fn write_trial_log(dir: &Path, log: &TrialLog, plan: &MissionPlan) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("trial.csv"))?;
    w.write_record(["time", "east", "north", "heading", "v_cmd", "omega_cmd", "phase"])?;
    for r in &log.rows {
        w.write_record([
            fmt6(r.time),
            fmt6(r.east),
            fmt6(r.north),
            fmt6(r.heading),
            fmt6(r.v_cmd),
            fmt6(r.omega_cmd),
            r.phase.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("commands.csv"))?;
    w.write_record(["time", "v", "omega", "e_y", "e_theta"])?;
    for c in &log.commands {
        w.write_record([
            fmt6(c.time),
            fmt6(c.v),
            fmt6(c.omega),
            c.e_y.map(fmt6).unwrap_or_default(),
            c.e_theta.map(fmt6).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("rtk.csv"))?;
    w.write_record(["time", "east", "north", "up", "std"])?;
    for f in &log.rtk {
        w.write_record([
            fmt6(f.timestamp),
            fmt6(f.position.east),
            fmt6(f.position.north),
            fmt6(f.position.up),
            fmt6(f.std),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("coarse.csv"))?;
    w.write_record(["time", "east", "north", "up", "accuracy"])?;
    for f in &log.coarse {
        w.write_record([
            fmt6(f.timestamp),
            fmt6(f.position.east),
            fmt6(f.position.north),
            fmt6(f.position.up),
            fmt6(f.accuracy),
        ])?;
    }
    w.flush()?;

    let mut events = std::fs::File::create(dir.join("events.jsonl"))?;
    for e in &log.events {
        serde_json::to_writer(&mut events, e)?;
        events.write_all(b"\n")?;
    }

    std::fs::write(dir.join("plan.json"), serde_json::to_string_pretty(plan)?)?;

    let meta = serde_json::json!({
        "schema_version": 1,
        "layout": log.layout_name,
        "seed": log.seed,
        "completed": log.completed,
        "interventions": log.interventions,
        "rows_completed": log.rows_completed,
        "control_rate_hz": CONTROL_RATE_HZ,
        "gps_rate_hz": GPS_RATE_HZ,
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Read back an rtk.csv (or compatible) fix log.
pub fn read_rtk_csv(path: &Path) -> io::Result<Vec<RtkFix>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers().map_err(io::Error::other)?.clone();
    let expected = ["time", "east", "north", "up"];
    for (i, name) in expected.iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(io::Error::other(format!(
                "unexpected fix log header {:?}, expected {:?}",
                headers, expected
            )));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(io::Error::other)?;
        let f = |i: usize| -> io::Result<f64> {
            rec.get(i)
                .ok_or_else(|| io::Error::other("short fix record"))?
                .parse::<f64>()
                .map_err(io::Error::other)
        };
        out.push(RtkFix {
            timestamp: f(0)?,
            position: crate::geometry::WorldPoint::new(f(1)?, f(2)?, f(3)?),
            std: f(4).unwrap_or(0.0),
        });
    }
    Ok(out)
}

pub fn read_events_jsonl(path: &Path) -> io::Result<Vec<NavEvent>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::other))
        .collect()
}

pub fn read_plan_json(path: &Path) -> io::Result<MissionPlan> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(io::Error::other)
}

/// Write an annotation input log from a trial: frames.jsonl (15 Hz),
/// poses.jsonl (10 Hz), camera.json and path.json (the RTK track).
pub fn write_annotation_log(
    dir: &Path,
    log: &TrialLog,
    camera: &CameraSpec,
    max_frames: Option<usize>,
) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let n = max_frames.unwrap_or(usize::MAX);

    let mut frames = std::fs::File::create(dir.join("frames.jsonl"))?;
    for (i, r) in log.rows.iter().take(n).enumerate() {
        serde_json::to_writer(
            &mut frames,
            &serde_json::json!({ "frame_id": i as u64, "time": r.time }),
        )?;
        frames.write_all(b"\n")?;
    }

    let mut poses = std::fs::File::create(dir.join("poses.jsonl"))?;
    for (t, p) in &log.gnss_poses {
        serde_json::to_writer(
            &mut poses,
            &serde_json::json!({
                "time": t,
                "east": p.position.east,
                "north": p.position.north,
                "up": p.position.up,
                "heading": p.heading,
                "pitch": p.pitch,
                "roll": p.roll,
            }),
        )?;
        poses.write_all(b"\n")?;
    }

    std::fs::write(dir.join("camera.json"), serde_json::to_string_pretty(camera)?)?;

    let points: Vec<serde_json::Value> = log
        .rtk
        .iter()
        .map(|f| {
            serde_json::json!({
                "time": f.timestamp,
                "east": f.position.east,
                "north": f.position.north,
                "up": f.position.up,
            })
        })
        .collect();
    std::fs::write(
        dir.join("path.json"),
        serde_json::to_string_pretty(&serde_json::json!({ "points": points }))?,
    )?;
    Ok(())
}
