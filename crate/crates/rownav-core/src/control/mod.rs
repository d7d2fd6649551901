//! BEV reference-path following: line fitting, lateral/heading errors and the
//! feedback-linearized PD velocity controller.

use crate::geometry::GroundPoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Derivative terms are computed by backward difference with the step clamped
/// to at least this many seconds.
pub const MIN_DERIVATIVE_DT: f64 = 0.010;

/// Fits must span at least this much forward distance.
pub const MIN_FIT_SPAN: f64 = 1.0;

/// Linear speed never scales below this fraction of nominal.
pub const MIN_SPEED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("reference fit is degenerate (too few points, short span, or path perpendicular to heading)")]
pub struct DegenerateFit;

/// Linear and angular velocity for the differential-drive base, already
/// clamped to the configured limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCommand {
    pub fn stop() -> Self {
        Self { v: 0.0, omega: 0.0 }
    }
}

/// PD gains, look-ahead geometry and velocity limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    pub kp: f64,
    pub kd: f64,
    pub lookahead_d: f64,
    pub v_nominal: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { kp: 1.2, kd: 0.3, lookahead_d: 2.0, v_nominal: 0.8, v_max: 1.0, omega_max: 1.0 }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), String> {
        if self.kp <= 0.0 {
            return Err("kp must be positive".into());
        }
        if self.kd < 0.0 {
            return Err("kd must be nonnegative".into());
        }
        if self.lookahead_d <= 0.0 {
            return Err("lookahead distance must be positive".into());
        }
        if self.v_nominal <= 0.0 || self.v_max <= 0.0 || self.omega_max <= 0.0 {
            return Err("speeds and limits must be positive".into());
        }
        Ok(())
    }
}

/// A fitted BEV reference: the raw ground points plus the total-least-squares
/// line expressed as errors at the look-ahead station.
#[derive(Debug, Clone, PartialEq)]
pub struct BevPath {
    pub points: Vec<GroundPoint>,
    /// Signed lateral offset of the line at the look-ahead station (left
    /// positive), meters.
    pub e_y: f64,
    /// Signed angle between the robot heading and the line, radians.
    pub e_theta: f64,
    /// RMS orthogonal fit residual, meters.
    pub residual_rms: f64,
    /// Discounted when the reference was extrapolated from behind the robot.
    pub confidence: f64,
}

/// Total-least-squares line fit of ground points, reported as (e_y, e_theta)
/// at `lookahead_d` ahead of the robot.
///
/// Orthogonal regression via the scatter-matrix eigendirection; the line
/// direction is normalized to positive forward component, so `e_theta` lands
/// in `(-pi/2, pi/2)` with leftward lines positive.
pub fn fit_reference(points: &[GroundPoint], lookahead_d: f64) -> Result<BevPath, DegenerateFit> {
    if points.len() < 3 {
        return Err(DegenerateFit);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x_forward).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y_left).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        let dx = p.x_forward - mx;
        let dy = p.y_left - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        x_min = x_min.min(p.x_forward);
        x_max = x_max.max(p.x_forward);
    }
    if x_max - x_min < MIN_FIT_SPAN {
        return Err(DegenerateFit);
    }

    // Principal direction of the 2x2 scatter matrix.
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (sa, ca) = angle.sin_cos();
    if ca.abs() < 0.05 {
        // Nearly perpendicular to the forward axis: e_y at a forward station
        // is undefined.
        return Err(DegenerateFit);
    }
    let (dir_x, dir_y) = if ca >= 0.0 { (ca, sa) } else { (-ca, -sa) };
    let e_theta = dir_y.atan2(dir_x);
    let e_y = my + (lookahead_d - mx) * (dir_y / dir_x);

    // Smallest scatter eigenvalue = total squared orthogonal residual.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lam_min = tr / 2.0 - ((tr / 2.0).powi(2) - det).max(0.0).sqrt();
    let residual_rms = (lam_min.max(0.0) / n).sqrt();

    Ok(BevPath { points: points.to_vec(), e_y, e_theta, residual_rms, confidence: 1.0 })
}

/// Re-express a rear-camera reference as a forward one.
///
/// The fitted line is extrapolated through the robot origin to forward
/// stations; confidence is discounted by the extrapolation distance from the
/// most forward observed point to the look-ahead station.
pub fn extend_back_path(
    rear_points: &[GroundPoint],
    lookahead_d: f64,
) -> Result<BevPath, DegenerateFit> {
    let fit = fit_reference(rear_points, lookahead_d)?;
    let x_front = rear_points.iter().map(|p| p.x_forward).fold(f64::NEG_INFINITY, f64::max);
    let extrapolation = (lookahead_d - x_front).max(0.0);
    let slope = fit.e_theta.tan();
    let y_at = |x: f64| fit.e_y + (x - lookahead_d) * slope;
    let points: Vec<GroundPoint> = (1..=8)
        .map(|i| {
            let x = lookahead_d * i as f64 / 4.0;
            GroundPoint::new(x, y_at(x))
        })
        .collect();
    Ok(BevPath {
        points,
        e_y: fit.e_y,
        e_theta: fit.e_theta,
        residual_rms: fit.residual_rms,
        confidence: 1.0 / (1.0 + extrapolation / 5.0),
    })
}

/// One feedback-linearized PD step.
///
/// The look-ahead point of the unicycle is regulated linearly: with
/// `u = kp·e_y + kd·ė_y`, the angular rate `ω = (v sin e_θ + u)/(L cos e_θ)`
/// makes the station's lateral error follow `ė_y = -u`. Linear speed is the
/// nominal scaled by `cos e_θ` (floored at 20%); both outputs are clamped to
/// the limits.
pub fn compute_command(
    e_y: f64,
    e_theta: f64,
    previous: Option<(f64, f64)>,
    dt: f64,
    gains: &ControllerGains,
) -> VelocityCommand {
    assert!(dt > 0.0, "control step must be positive");
    let dt = dt.max(MIN_DERIVATIVE_DT);
    let de_y = previous.map(|(py, _)| (e_y - py) / dt).unwrap_or(0.0);
    let v = gains.v_nominal * e_theta.cos().max(MIN_SPEED_FRACTION);
    let u = gains.kp * e_y + gains.kd * de_y;
    let omega = (v * e_theta.sin() + u) / (gains.lookahead_d * e_theta.cos());
    VelocityCommand {
        v: v.clamp(-gains.v_max, gains.v_max),
        omega: omega.clamp(-gains.omega_max, gains.omega_max),
    }
}

/// Stateful wrapper around [`compute_command`]: keeps previous errors for the
/// derivative term and implements the loss-of-detection policy (hold the last
/// command briefly, then stop).
#[derive(Debug, Clone)]
pub struct PathFollower {
    gains: ControllerGains,
    previous: Option<(f64, f64)>,
    last_cmd: VelocityCommand,
    loss_elapsed: f64,
    hold_last_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerOutput {
    pub cmd: VelocityCommand,
    /// Set while coasting or stopped due to missing detections.
    pub lost: bool,
}

impl PathFollower {
    pub fn new(gains: ControllerGains, hold_last_s: f64) -> Self {
        Self {
            gains,
            previous: None,
            last_cmd: VelocityCommand::stop(),
            loss_elapsed: 0.0,
            hold_last_s,
        }
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn reset(&mut self) {
        self.previous = None;
        self.last_cmd = VelocityCommand::stop();
        self.loss_elapsed = 0.0;
    }

    /// Seconds of continuous detection loss.
    pub fn loss_elapsed(&self) -> f64 {
        self.loss_elapsed
    }

    pub fn update(&mut self, errors: Option<(f64, f64)>, dt: f64) -> FollowerOutput {
        match errors {
            Some((e_y, e_theta)) => {
                let cmd = compute_command(e_y, e_theta, self.previous, dt, &self.gains);
                self.previous = Some((e_y, e_theta));
                self.last_cmd = cmd;
                self.loss_elapsed = 0.0;
                FollowerOutput { cmd, lost: false }
            }
            None => {
                self.loss_elapsed += dt;
                self.previous = None;
                let cmd = if self.loss_elapsed <= self.hold_last_s {
                    self.last_cmd
                } else {
                    VelocityCommand::stop()
                };
                FollowerOutput { cmd, lost: true }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_points(e_y: f64, e_theta: f64, lookahead: f64, noise: f64, seed: u64) -> Vec<GroundPoint> {
        // Points on the line passing through (lookahead, e_y) with slope
        // tan(e_theta), sampled over x in [0.5, 8].
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..40)
            .map(|i| {
                let x = 0.5 + 7.5 * i as f64 / 39.0;
                let y = e_y + (x - lookahead) * e_theta.tan();
                let jitter = if noise > 0.0 { rng.random_range(-noise..noise) } else { 0.0 };
                GroundPoint::new(x, y + jitter)
            })
            .collect()
    }

    #[test]
    fn fit_on_axis_is_zero() {
        let pts: Vec<GroundPoint> = (0..20).map(|i| GroundPoint::new(0.5 * i as f64, 0.0)).collect();
        let fit = fit_reference(&pts, 2.0).unwrap();
        assert_relative_eq!(fit.e_y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.e_theta, 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.residual_rms, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn fit_parallel_left_offset() {
        let pts: Vec<GroundPoint> =
            (0..20).map(|i| GroundPoint::new(0.5 * i as f64, 0.3)).collect();
        let fit = fit_reference(&pts, 2.0).unwrap();
        assert_relative_eq!(fit.e_y, 0.3, epsilon = 1e-12);
        assert_relative_eq!(fit.e_theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_recovers_known_line_under_noise() {
        let truth = (0.42, 0.12);
        let pts = line_points(truth.0, truth.1, 2.0, 0.01, 5);
        let fit = fit_reference(&pts, 2.0).unwrap();
        assert!((fit.e_y - truth.0).abs() < 0.02, "e_y {} vs {}", fit.e_y, truth.0);
        assert!(
            (fit.e_theta - truth.1).abs() < 0.5f64.to_radians(),
            "e_theta {} vs {}",
            fit.e_theta,
            truth.1
        );
    }

    #[test]
    fn degenerate_fits_are_rejected() {
        assert_eq!(fit_reference(&[GroundPoint::new(1.0, 0.0)], 2.0), Err(DegenerateFit));
        let clustered: Vec<GroundPoint> =
            (0..10).map(|i| GroundPoint::new(2.0 + 0.01 * i as f64, 0.1)).collect();
        assert_eq!(fit_reference(&clustered, 2.0), Err(DegenerateFit));
    }

    #[test]
    fn zero_errors_mean_straight_nominal() {
        let gains = ControllerGains::default();
        let cmd = compute_command(0.0, 0.0, None, 1.0 / 15.0, &gains);
        assert_relative_eq!(cmd.v, gains.v_nominal);
        assert_relative_eq!(cmd.omega, 0.0);
    }

    #[test]
    fn path_to_the_left_turns_left() {
        let gains = ControllerGains::default();
        let cmd = compute_command(0.3, 0.0, None, 1.0 / 15.0, &gains);
        assert!(cmd.omega > 0.0);
    }

    #[test]
    fn command_is_odd_in_errors() {
        let gains = ControllerGains::default();
        for (ey, eth, prev) in [(0.2, 0.1, Some((0.25, 0.12))), (0.5, -0.3, Some((0.4, -0.2)))] {
            let a = compute_command(ey, eth, prev, 1.0 / 15.0, &gains);
            let b = compute_command(-ey, -eth, prev.map(|(y, t)| (-y, -t)), 1.0 / 15.0, &gains);
            assert_relative_eq!(a.omega, -b.omega, epsilon = 1e-12);
            assert_relative_eq!(a.v, b.v, epsilon = 1e-12);
        }
    }

    #[test]
    fn limits_hold_for_wild_inputs() {
        let gains = ControllerGains::default();
        for ey in [-100.0, -5.0, 3.0, 80.0] {
            for eth in [-1.4, -0.7, 0.9, 1.5] {
                let cmd = compute_command(ey, eth, Some((ey * 2.0, eth)), 0.001, &gains);
                assert!(cmd.v.abs() <= gains.v_max + 1e-12);
                assert!(cmd.omega.abs() <= gains.omega_max + 1e-12);
            }
        }
    }

    #[test]
    fn rear_reference_extends_forward() {
        // Rear path collinear with the robot axis -> forward reference (0,0).
        let rear: Vec<GroundPoint> =
            (0..20).map(|i| GroundPoint::new(-1.0 - 0.4 * i as f64, 0.0)).collect();
        let fwd = extend_back_path(&rear, 2.0).unwrap();
        assert_relative_eq!(fwd.e_y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(fwd.e_theta, 0.0, epsilon = 1e-12);
        assert!(fwd.confidence < 1.0);

        // Rear path 0.2 m right of the robot extends to 0.2 m right ahead.
        let rear: Vec<GroundPoint> =
            (0..20).map(|i| GroundPoint::new(-1.0 - 0.4 * i as f64, -0.2)).collect();
        let fwd = extend_back_path(&rear, 2.0).unwrap();
        assert_relative_eq!(fwd.e_y, -0.2, epsilon = 1e-12);
        assert!(fwd.points.iter().all(|p| p.x_forward > 0.0));
    }

    #[test]
    fn rear_heading_error_amplifies_with_lookahead() {
        // A 2° rear fit heading error produces ~ 3*tan(2°) of lateral error
        // at a 3 m station (trigonometric consequence of extrapolation).
        let theta = 2f64.to_radians();
        let rear: Vec<GroundPoint> = (0..30)
            .map(|i| {
                let x = -1.0 - 0.3 * i as f64;
                GroundPoint::new(x, x * theta.tan())
            })
            .collect();
        let fwd = extend_back_path(&rear, 3.0).unwrap();
        let expected = 3.0 * theta.tan();
        assert_relative_eq!(fwd.e_y, expected, epsilon = 1e-9);
    }

    #[test]
    fn follower_holds_then_stops_on_loss() {
        let mut f = PathFollower::new(ControllerGains::default(), 0.5);
        let moving = f.update(Some((0.1, 0.0)), 1.0 / 15.0);
        assert!(moving.cmd.v > 0.0);
        let mut elapsed = 0.0;
        let mut saw_hold = false;
        loop {
            let out = f.update(None, 1.0 / 15.0);
            elapsed += 1.0 / 15.0;
            assert!(out.lost);
            if elapsed <= 0.5 {
                assert_eq!(out.cmd, moving.cmd);
                saw_hold = true;
            } else {
                assert_eq!(out.cmd, VelocityCommand::stop());
                break;
            }
        }
        assert!(saw_hold);
    }
}
