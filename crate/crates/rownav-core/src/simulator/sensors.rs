//! Synthetic GPS fixes and side-view depth profiles.

use super::{NoiseSpec, RobotState, RowSegment, VineyardLayout};
use crate::geometry::{CameraId, CameraModel, WorldPoint};
use crate::navigator::CoarseGpsFix;
use crate::perception::{DepthProfile, DepthSample};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Depth rays return this range when no vine row is hit.
pub const DEPTH_MAX_RANGE: f64 = 10.0;

/// Rays per side-view depth profile, spread across the camera's horizontal
/// field of view.
pub const DEPTH_RAY_COUNT: usize = 32;

/// A centimeter-grade GPS fix used for annotation and evaluation ground
/// truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtkFix {
    pub position: WorldPoint,
    pub std: f64,
    pub timestamp: f64,
}

fn gauss<R: Rng>(rng: &mut R, std: f64) -> f64 {
    if std <= 0.0 {
        // Keep the draw so the stream advances identically with noise off.
        let _ = rng.random::<f64>();
        return 0.0;
    }
    Normal::new(0.0, std).expect("valid std").sample(rng)
}

/// Sample a low-cost GPS fix: true position plus isotropic Gaussian noise.
pub fn sample_gps_coarse<R: Rng>(
    state: &RobotState,
    timestamp: f64,
    noise: &NoiseSpec,
    rng: &mut R,
) -> CoarseGpsFix {
    let p = state.pose.position;
    CoarseGpsFix {
        position: WorldPoint::new(
            p.east + gauss(rng, noise.coarse_std),
            p.north + gauss(rng, noise.coarse_std),
            p.up,
        ),
        accuracy: noise.coarse_accuracy,
        timestamp,
    }
}

/// Sample an RTK-grade fix.
pub fn sample_gps_rtk<R: Rng>(
    state: &RobotState,
    timestamp: f64,
    noise: &NoiseSpec,
    rng: &mut R,
) -> RtkFix {
    let p = state.pose.position;
    RtkFix {
        position: WorldPoint::new(
            p.east + gauss(rng, noise.rtk_std),
            p.north + gauss(rng, noise.rtk_std),
            p.up,
        ),
        std: noise.rtk_std,
        timestamp,
    }
}

/// First positive ray parameter at which `origin + t * dir` crosses the
/// segment, if any.
fn ray_segment_hit(origin: (f64, f64), dir: (f64, f64), seg: &RowSegment) -> Option<f64> {
    let (ax, ay) = (seg.start.east, seg.start.north);
    let ex = seg.end.east - ax;
    let ey = seg.end.north - ay;
    let det = dir.0 * (-ey) - dir.1 * (-ex);
    if det.abs() < 1e-12 {
        return None;
    }
    let rx = ax - origin.0;
    let ry = ay - origin.1;
    let t = (rx * (-ey) - ry * (-ex)) / det;
    let s = (dir.0 * ry - dir.1 * rx) / det;
    if t > 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Ray-cast a horizontal depth fan from a side camera against the vine rows,
/// treated as vertical walls. Rays that miss report max range; Gaussian depth
/// noise and dropouts are applied per ray.
pub fn sample_side_depth<R: Rng>(
    state: &RobotState,
    layout: &VineyardLayout,
    cam: &CameraModel,
    cam_id: CameraId,
    noise: &NoiseSpec,
    rng: &mut R,
) -> DepthProfile {
    let half_fov = (cam.cx / cam.fx).atan();
    let mount_pos = cam.mount.inverse().translation;
    let (sh, ch) = state.pose.heading.sin_cos();
    let origin = (
        state.pose.position.east + ch * mount_pos.x - sh * mount_pos.y,
        state.pose.position.north + sh * mount_pos.x + ch * mount_pos.y,
    );
    let view = state.pose.heading + cam_id.mount_yaw();

    let mut samples = Vec::with_capacity(DEPTH_RAY_COUNT);
    for i in 0..DEPTH_RAY_COUNT {
        let bearing =
            -half_fov + 2.0 * half_fov * (i as f64 + 0.5) / DEPTH_RAY_COUNT as f64;
        let ang = view + bearing;
        let dir = (ang.cos(), ang.sin());
        let mut depth = DEPTH_MAX_RANGE;
        for seg in &layout.rows {
            if let Some(t) = ray_segment_hit(origin, dir, seg) {
                if t < depth {
                    depth = t;
                }
            }
        }
        let dropped = rng.random::<f64>() < noise.dropout_prob;
        let noisy = (depth + gauss(rng, noise.depth_std)).max(0.01);
        samples.push(DepthSample { bearing, depth: if dropped { None } else { Some(noisy) } });
    }
    DepthProfile { camera: cam_id, samples }
}
