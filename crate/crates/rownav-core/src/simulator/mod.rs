//! Deterministic kinematic world: vineyard layout, differential-drive
//! integration, synthetic sensors and the trial runner.

mod layout;
mod sensors;
mod trial;

pub use layout::{LayoutError, RowSegment, VineyardLayout, MAX_ROW_SKEW_DEG, ROBOT_WIDTH};
pub use sensors::{
    sample_gps_coarse, sample_gps_rtk, sample_side_depth, RtkFix, DEPTH_MAX_RANGE, DEPTH_RAY_COUNT,
};
pub use trial::{
    default_duration, read_events_jsonl, read_plan_json, read_rtk_csv, run_trial,
    write_annotation_log, write_trial_log, CommandRow, LogRow, Script, ScriptAction, ScriptEvent,
    TrialLog, TrialSetup, CONTROL_RATE_HZ, GPS_RATE_HZ,
};

use crate::control::VelocityCommand;
use crate::geometry::{wrap_angle, WorldPose};
use serde::{Deserialize, Serialize};

/// Planar kinematic state of the differential-drive base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: WorldPose,
    pub v: f64,
    pub omega: f64,
    pub time: f64,
}

impl RobotState {
    pub fn at(pose: WorldPose) -> Self {
        Self { pose, v: 0.0, omega: 0.0, time: 0.0 }
    }
}

/// Exact unicycle integration over one step: a circular arc for nonzero
/// angular rate, a straight advance otherwise.
pub fn integrate(state: &RobotState, cmd: &VelocityCommand, dt: f64) -> RobotState {
    assert!(dt > 0.0 && dt <= 0.2, "step size out of range: {dt}");
    let h = state.pose.heading;
    let (e, n) = if cmd.omega.abs() < 1e-9 {
        (
            state.pose.position.east + cmd.v * dt * h.cos(),
            state.pose.position.north + cmd.v * dt * h.sin(),
        )
    } else {
        let r = cmd.v / cmd.omega;
        (
            state.pose.position.east + r * ((h + cmd.omega * dt).sin() - h.sin()),
            state.pose.position.north - r * ((h + cmd.omega * dt).cos() - h.cos()),
        )
    };
    let mut pose = state.pose;
    pose.position.east = e;
    pose.position.north = n;
    pose.heading = wrap_angle(h + cmd.omega * dt);
    RobotState { pose, v: cmd.v, omega: cmd.omega, time: state.time + dt }
}

/// Sensor noise parameters; all randomness in a trial flows from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// RTK fix noise (isotropic, meters).
    pub rtk_std: f64,
    /// Low-cost GPS fix noise (isotropic, meters).
    pub coarse_std: f64,
    /// Accuracy figure carried on coarse fixes.
    pub coarse_accuracy: f64,
    /// Detected-path angular error std (degrees) per view-heading bin:
    /// `[-25,-15)`, `[-15,-5)`, `[-5,5)`, `[5,15)`, `[15,25]`.
    pub heading_bin_stds: [f64; 5],
    /// Detected-path lateral error std (meters).
    pub lateral_std: f64,
    /// Depth ray noise std (meters).
    pub depth_std: f64,
    /// Per-observation dropout probability.
    pub dropout_prob: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            rtk_std: 0.02,
            coarse_std: 2.0,
            coarse_accuracy: 5.0,
            heading_bin_stds: [2.36, 2.22, 1.10, 1.57, 8.05],
            lateral_std: 0.05,
            depth_std: 0.05,
            dropout_prob: 0.02,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// All noise sources disabled.
    pub fn zero() -> Self {
        Self {
            rtk_std: 0.0,
            coarse_std: 0.0,
            coarse_accuracy: 5.0,
            heading_bin_stds: [0.0; 5],
            lateral_std: 0.0,
            depth_std: 0.0,
            dropout_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let stds = [self.rtk_std, self.coarse_std, self.lateral_std, self.depth_std];
        if stds.iter().chain(self.heading_bin_stds.iter()).any(|s| *s < 0.0) {
            return Err("noise standard deviations must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(format!("dropout probability {} outside [0, 1]", self.dropout_prob));
        }
        if self.coarse_accuracy <= 0.0 {
            return Err("coarse accuracy must be positive".into());
        }
        Ok(())
    }
}
