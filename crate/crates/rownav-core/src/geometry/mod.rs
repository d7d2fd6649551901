//! Coordinate frames, rigid transforms, pinhole projection and the
//! ground-plane homography.
//!
//! Conventions used throughout the crate:
//!
//! - **World frame**: east-north-up (ENU), meters. Headings are measured CCW
//!   from east about the up axis.
//! - **Robot frame**: x-forward, y-left, z-up, origin on the ground under the
//!   base center.
//! - **Camera frame**: x-right, y-down, z along the optical axis.
//! - **Image frame**: u rightward, v downward, pixel centers at integer
//!   coordinates, origin at the top-left pixel.

mod camera;
mod homography;

pub use camera::{project_point, CameraId, CameraModel, CameraRig, CameraSpec, NotVisible};
pub use homography::{
    ground_homography, image_path_to_bev, DegenerateView, EmptyPath, GroundHomography,
    DEFAULT_MAX_CONDITION,
};

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Points at or behind this camera-frame depth are treated as invisible to
/// avoid projective blowup near the camera plane.
pub const EPS_DEPTH: f64 = 1e-3;

/// Normalize an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Fold an angle difference into `[-pi/2, pi/2)`, identifying opposite
/// directions. Used when comparing a view direction against a row that can be
/// traversed either way.
pub fn fold_half_circle(a: f64) -> f64 {
    let mut r = wrap_angle(a);
    if r >= PI / 2.0 {
        r -= PI;
    } else if r < -PI / 2.0 {
        r += PI;
    }
    r
}

/// A point in the ENU world frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

impl WorldPoint {
    pub fn new(east: f64, north: f64, up: f64) -> Self {
        debug_assert!(east.is_finite() && north.is_finite() && up.is_finite());
        Self { east, north, up }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.east, self.north, self.up)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// Horizontal (east/north) distance to another point.
    pub fn planar_distance(&self, other: &WorldPoint) -> f64 {
        ((self.east - other.east).powi(2) + (self.north - other.north).powi(2)).sqrt()
    }
}

/// Pose of the robot base in the world frame.
///
/// `heading` is CCW from east; `pitch` and `roll` follow the right-hand rule
/// about the robot's y-left and x-forward axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPose {
    pub position: WorldPoint,
    pub heading: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl WorldPose {
    pub fn new(position: WorldPoint, heading: f64, pitch: f64, roll: f64) -> Self {
        debug_assert!(pitch.abs() < PI / 2.0 && roll.abs() < PI / 2.0);
        Self {
            position,
            heading: wrap_angle(heading),
            pitch,
            roll,
        }
    }

    /// Planar pose on flat ground.
    pub fn planar(east: f64, north: f64, heading: f64) -> Self {
        Self::new(WorldPoint::new(east, north, 0.0), heading, 0.0, 0.0)
    }

    /// Rotation taking robot-frame vectors to world-frame vectors.
    pub fn rotation_to_world(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.heading)
    }

    /// Transform mapping world-frame points into the robot frame.
    pub fn world_to_robot(&self) -> RigidTransform {
        let r = self.rotation_to_world().inverse();
        let t = -(r * self.position.as_vector());
        RigidTransform { rotation: r, translation: t }
    }

    /// Express a world point in robot-local ground coordinates (forward/left).
    pub fn to_local_ground(&self, p: &WorldPoint) -> GroundPoint {
        let d = p.as_vector() - self.position.as_vector();
        let (s, c) = self.heading.sin_cos();
        GroundPoint {
            x_forward: c * d.x + s * d.y,
            y_left: -s * d.x + c * d.y,
        }
    }
}

/// A pixel location; may fall outside the image (visibility is a separate
/// predicate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// A point on the robot-local ground plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub x_forward: f64,
    pub y_left: f64,
}

impl GroundPoint {
    pub fn new(x_forward: f64, y_left: f64) -> Self {
        Self { x_forward, y_left }
    }

    pub fn range(&self) -> f64 {
        self.x_forward.hypot(self.y_left)
    }
}

/// Rigid transform `p' = R p + t` between two frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self {
            rotation: r,
            translation: -(r * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}
