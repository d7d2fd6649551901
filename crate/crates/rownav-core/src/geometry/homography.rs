//! Image ↔ ground-plane homography behind the bird's-eye view.
//!
//! The homography is derived analytically from intrinsics, mount extrinsics
//! and a flat-ground assumption: the ground is the world plane through the
//! robot's base, and ground coordinates are robot-local (forward/left). Within
//! the planar simulator this analytic form is exact.

use super::{CameraModel, GroundPoint, ImagePoint, WorldPose, EPS_DEPTH};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Condition-number bound above which the plane-induced homography is
/// rejected as degenerate.
pub const DEFAULT_MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("plane-induced homography is singular (condition number {condition:.3e})")]
pub struct DegenerateView {
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no path points map onto the ground plane within range")]
pub struct EmptyPath;

/// Invertible mapping between image pixels and robot-local ground-plane
/// coordinates for one camera at one pose.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundHomography {
    ground_to_image: Matrix3<f64>,
    image_to_ground: Matrix3<f64>,
}

impl GroundHomography {
    /// Build the homography for `cam` on a robot at `robot_pose`.
    ///
    /// The ground plane is the horizontal world plane at the robot's base
    /// height; output coordinates are robot-local forward/left.
    pub fn new(cam: &CameraModel, robot_pose: &WorldPose) -> Result<Self, DegenerateView> {
        let wc = cam.world_to_camera(robot_pose);
        let (sh, ch) = robot_pose.heading.sin_cos();
        let forward = Vector3::new(ch, sh, 0.0);
        let left = Vector3::new(-sh, ch, 0.0);
        let origin = robot_pose.position.as_vector();

        let k = Matrix3::new(cam.fx, 0.0, cam.cx, 0.0, cam.fy, cam.cy, 0.0, 0.0, 1.0);
        let m = Matrix3::from_columns(&[
            wc.rotation * forward,
            wc.rotation * left,
            wc.apply(origin),
        ]);
        let g2i = k * m;

        let svd = g2i.svd(false, false);
        let smax = svd.singular_values[0];
        let smin = svd.singular_values[2];
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !condition.is_finite() || condition > DEFAULT_MAX_CONDITION {
            return Err(DegenerateView { condition });
        }
        let i2g = g2i.try_inverse().ok_or(DegenerateView { condition })?;
        Ok(Self { ground_to_image: g2i, image_to_ground: i2g })
    }

    /// Homography for a camera on a robot at the local origin; useful when
    /// only robot-relative geometry matters.
    pub fn local(cam: &CameraModel) -> Result<Self, DegenerateView> {
        Self::new(cam, &WorldPose::planar(0.0, 0.0, 0.0))
    }

    pub fn ground_to_image(&self, g: &GroundPoint) -> Option<ImagePoint> {
        let h = self.ground_to_image * Vector3::new(g.x_forward, g.y_left, 1.0);
        if h.z <= EPS_DEPTH {
            return None;
        }
        Some(ImagePoint::new(h.x / h.z, h.y / h.z))
    }

    /// Map a pixel onto the ground plane. Returns `None` for pixels at or
    /// above the horizon, whose rays never pierce the ground in front of the
    /// camera.
    pub fn image_to_ground(&self, p: &ImagePoint) -> Option<GroundPoint> {
        let h = self.image_to_ground * Vector3::new(p.u, p.v, 1.0);
        if h.z.abs() < 1e-12 {
            return None;
        }
        let g = GroundPoint::new(h.x / h.z, h.y / h.z);
        // Reject solutions behind the camera (homogeneous sign flip past the
        // horizon): the reprojection depth must be positive.
        let back = self.ground_to_image * Vector3::new(g.x_forward, g.y_left, 1.0);
        if back.z <= EPS_DEPTH {
            return None;
        }
        Some(g)
    }

    pub fn matrix_ground_to_image(&self) -> &Matrix3<f64> {
        &self.ground_to_image
    }

    pub fn matrix_image_to_ground(&self) -> &Matrix3<f64> {
        &self.image_to_ground
    }
}

/// Analytic image↔ground homography for `cam` on a robot at `robot_pose`.
pub fn ground_homography(
    cam: &CameraModel,
    robot_pose: &WorldPose,
) -> Result<GroundHomography, DegenerateView> {
    GroundHomography::new(cam, robot_pose)
}

/// Map an ordered image path onto the ground plane, discarding points beyond
/// `max_range` (horizon divergence clamp), ordered by increasing distance
/// along the forward axis.
pub fn image_path_to_bev(
    points: &[ImagePoint],
    h: &GroundHomography,
    max_range: f64,
) -> Result<Vec<GroundPoint>, EmptyPath> {
    let mut out: Vec<GroundPoint> = points
        .iter()
        .filter_map(|p| h.image_to_ground(p))
        .filter(|g| g.range() <= max_range)
        .collect();
    if out.is_empty() {
        return Err(EmptyPath);
    }
    out.sort_by(|a, b| {
        a.x_forward
            .abs()
            .partial_cmp(&b.x_forward.abs())
            .expect("finite BEV coordinates")
    });
    Ok(out)
}
