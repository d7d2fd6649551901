//! Camera intrinsics, mount extrinsics and pinhole projection.

use super::{ImagePoint, RigidTransform, WorldPoint, WorldPose, EPS_DEPTH};
use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Which of the four body-mounted cameras an observation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraId {
    Front,
    Back,
    Left,
    Right,
}

impl CameraId {
    /// View yaw relative to the robot's forward axis.
    pub fn mount_yaw(&self) -> f64 {
        match self {
            CameraId::Front => 0.0,
            CameraId::Left => PI / 2.0,
            CameraId::Back => PI,
            CameraId::Right => -PI / 2.0,
        }
    }

    pub const ALL: [CameraId; 4] = [CameraId::Front, CameraId::Back, CameraId::Left, CameraId::Right];
}

/// A point did not land inside the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NotVisible {
    #[error("point at or behind the camera plane")]
    BehindCamera,
    #[error("projection falls outside the image bounds")]
    OutOfFrame,
}

/// Pinhole camera: intrinsics plus the rigid mount transform taking
/// robot-frame points into the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub mount: RigidTransform,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        mount: RigidTransform,
    ) -> Self {
        assert!(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
        assert!(cx >= 0.0 && cx < width as f64, "principal point x out of range");
        assert!(cy >= 0.0 && cy < height as f64, "principal point y out of range");
        Self { fx, fy, cx, cy, width, height, mount }
    }

    /// Build a camera mounted at `position` (robot frame, meters) looking
    /// toward `view_yaw` (CCW from forward) and pitched down by `pitch_down`.
    pub fn with_mount(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        position: Vector3<f64>,
        view_yaw: f64,
        pitch_down: f64,
    ) -> Self {
        let mount = mount_transform(position, view_yaw, pitch_down);
        Self::new(fx, fy, cx, cy, width, height, mount)
    }

    /// Default synthetic camera: 640x480, fx = fy = 600 px, mounted 1 m above
    /// the ground and pitched down 10 degrees, facing along `id`'s direction.
    pub fn default_for(id: CameraId) -> Self {
        Self::with_mount(
            600.0,
            600.0,
            320.0,
            240.0,
            640,
            480,
            Vector3::new(0.0, 0.0, 1.0),
            id.mount_yaw(),
            10f64.to_radians(),
        )
    }

    /// Heatmap (half image) resolution, each dimension `ceil(px / 2)`.
    pub fn heatmap_size(&self) -> (u32, u32) {
        (self.width.div_ceil(2), self.height.div_ceil(2))
    }

    /// World→camera transform for a given robot pose.
    pub fn world_to_camera(&self, robot_pose: &WorldPose) -> RigidTransform {
        self.mount.compose(&robot_pose.world_to_robot())
    }

    pub fn contains(&self, p: &ImagePoint) -> bool {
        p.u >= 0.0 && p.u < self.width as f64 && p.v >= 0.0 && p.v < self.height as f64
    }
}

/// Robot→camera transform for a camera at `position` looking toward
/// `view_yaw`, pitched down by `pitch_down`. Camera axes: x-right, y-down,
/// z along the view direction.
pub fn mount_transform(position: Vector3<f64>, view_yaw: f64, pitch_down: f64) -> RigidTransform {
    let (sy, cy) = view_yaw.sin_cos();
    let (sp, cp) = pitch_down.sin_cos();
    let forward = Vector3::new(cy * cp, sy * cp, -sp);
    let right = Vector3::new(sy, -cy, 0.0);
    let down = forward.cross(&right);
    // Columns are the camera axes in robot coordinates; transpose maps
    // robot-frame vectors into the camera frame.
    let cam_to_robot =
        Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[right, down, forward]));
    let rot = cam_to_robot.inverse();
    RigidTransform {
        rotation: rot,
        translation: -(rot * position),
    }
}

/// Project a world point through the camera at the given robot pose.
///
/// Returns [`NotVisible`] when the point sits at or behind the camera plane
/// (depth ≤ [`EPS_DEPTH`]) or lands outside the image bounds; annotation
/// simply skips such points.
pub fn project_point(
    cam: &CameraModel,
    robot_pose: &WorldPose,
    p: &WorldPoint,
) -> Result<ImagePoint, NotVisible> {
    let pc = cam.world_to_camera(robot_pose).apply(p.as_vector());
    if pc.z <= EPS_DEPTH {
        return Err(NotVisible::BehindCamera);
    }
    let pt = ImagePoint::new(cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy);
    if cam.contains(&pt) {
        Ok(pt)
    } else {
        Err(NotVisible::OutOfFrame)
    }
}

/// Serializable camera description: intrinsics plus a yaw/pitch mount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Camera position in the robot frame, meters.
    pub mount_position: [f64; 3],
    pub view_yaw_deg: f64,
    pub pitch_down_deg: f64,
}

impl CameraSpec {
    pub fn default_for(id: CameraId) -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            mount_position: [0.0, 0.0, 1.0],
            view_yaw_deg: id.mount_yaw().to_degrees(),
            pitch_down_deg: 10.0,
        }
    }

    pub fn to_model(&self) -> CameraModel {
        CameraModel::with_mount(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            Vector3::new(self.mount_position[0], self.mount_position[1], self.mount_position[2]),
            self.view_yaw_deg.to_radians(),
            self.pitch_down_deg.to_radians(),
        )
    }
}

/// The four default body cameras as one rig.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub front: CameraModel,
    pub back: CameraModel,
    pub left: CameraModel,
    pub right: CameraModel,
}

impl CameraRig {
    pub fn get(&self, id: CameraId) -> &CameraModel {
        match id {
            CameraId::Front => &self.front,
            CameraId::Back => &self.back,
            CameraId::Left => &self.left,
            CameraId::Right => &self.right,
        }
    }
}

impl Default for CameraRig {
    fn default() -> Self {
        Self {
            front: CameraModel::default_for(CameraId::Front),
            back: CameraModel::default_for(CameraId::Back),
            left: CameraModel::default_for(CameraId::Left),
            right: CameraModel::default_for(CameraId::Right),
        }
    }
}
