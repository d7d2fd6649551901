//! Automatic annotation: project a recorded centimeter-grade GPS path into
//! recorded frames and render Gaussian ground-truth heatmaps.
//!
//! Projection is purely geometric; canopy occlusion of the path is not
//! modeled, so labels extend through foliage that would hide them from a
//! real camera.

mod dataset;
mod heatmap;

pub use dataset::{
    build_dataset, read_annotation_log, read_path_file, AnnotateConfig, AnnotationLog,
    DatasetError, DatasetManifest, FrameStamp, ManifestRecord, SkipReason,
};
pub use heatmap::{render_heatmap, Heatmap, HEATMAP_SCALE};

use crate::geometry::{
    project_point, wrap_angle, CameraId, CameraModel, ImagePoint, WorldPoint, WorldPose,
};
use crate::perception::{ImagePath, PathEntry};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default forward window of path projected into a frame; beyond ~20 m the
/// path subtends less than a pixel.
pub const DEFAULT_LOOKAHEAD: f64 = 20.0;

/// Default Gaussian kernel width, full-resolution pixels.
pub const DEFAULT_SIGMA: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no path vertex projects into the image")]
pub struct NoVisiblePath;

/// A timestamped world polyline (e.g. the RTK path driven during setup).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPolyline {
    points: Vec<WorldPoint>,
    timestamps: Vec<f64>,
}

impl PathPolyline {
    pub fn new(points: Vec<WorldPoint>, timestamps: Vec<f64>) -> Result<Self, String> {
        if points.len() < 2 {
            return Err(format!("path needs at least 2 points, got {}", points.len()));
        }
        if points.len() != timestamps.len() {
            return Err("points and timestamps must pair up".into());
        }
        if !timestamps.windows(2).all(|w| w[0] < w[1]) {
            return Err("timestamps must be strictly increasing".into());
        }
        Ok(Self { points, timestamps })
    }

    pub fn points(&self) -> &[WorldPoint] {
        &self.points
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn time_span(&self) -> (f64, f64) {
        (self.timestamps[0], *self.timestamps.last().unwrap())
    }

    /// Arc length of the whole polyline.
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].planar_distance(&w[1])).sum()
    }

    /// Arc-length parameter of the point on the polyline nearest to `p`.
    fn nearest_arc(&self, p: &WorldPoint) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let seg = w[1].as_vector() - w[0].as_vector();
            let len = seg.norm();
            if len < 1e-12 {
                continue;
            }
            let t = ((p.as_vector() - w[0].as_vector()).dot(&seg) / (len * len)).clamp(0.0, 1.0);
            let q = w[0].as_vector() + seg * t;
            let d = (p.as_vector() - q).norm();
            if d < best.0 {
                best = (d, acc + t * len);
            }
            acc += len;
        }
        best.1
    }

    fn point_at_arc(&self, s: f64) -> WorldPoint {
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let len = w[0].planar_distance(&w[1]);
            if acc + len >= s && len > 1e-12 {
                let t = (s - acc) / len;
                let v = w[0].as_vector() + (w[1].as_vector() - w[0].as_vector()) * t;
                return WorldPoint::from_vector(v);
            }
            acc += len;
        }
        *self.points.last().unwrap()
    }

    /// Vertices of the sub-polyline from arc `s0` forward by `length`,
    /// including interpolated endpoints.
    fn slice_forward(&self, s0: f64, length: f64) -> Vec<WorldPoint> {
        let total = self.length();
        let s1 = (s0 + length).min(total);
        if s1 <= s0 {
            return Vec::new();
        }
        let mut out = vec![self.point_at_arc(s0)];
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let len = w[0].planar_distance(&w[1]);
            let vertex_s = acc + len;
            if vertex_s > s0 && vertex_s < s1 {
                out.push(w[1]);
            }
            acc = vertex_s;
        }
        out.push(self.point_at_arc(s1));
        out
    }
}

/// One recorded camera frame with its interpolated base pose.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub pose: WorldPose,
    pub camera: CameraModel,
    pub timestamp: f64,
    /// Whether the pose fell outside the sampled track and was extrapolated.
    pub extrapolated: bool,
}

/// Timestamped base poses (e.g. the 10 Hz GNSS-IMU stream).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseTrack {
    times: Vec<f64>,
    poses: Vec<WorldPose>,
}

impl PoseTrack {
    pub fn new(times: Vec<f64>, poses: Vec<WorldPose>) -> Result<Self, String> {
        if times.len() != poses.len() || times.len() < 2 {
            return Err("pose track needs at least two paired samples".into());
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err("pose timestamps must be strictly increasing".into());
        }
        Ok(Self { times, poses })
    }

    pub fn time_span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    /// Linear interpolation between bracketing samples; heading interpolated
    /// along the shortest arc. `None` outside the track span.
    pub fn interpolate(&self, t: f64) -> Option<WorldPose> {
        let (t0, t1) = self.time_span();
        if t < t0 || t > t1 {
            return None;
        }
        let idx = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return Some(self.poses[i]),
            Err(i) => i,
        };
        let (ta, tb) = (self.times[idx - 1], self.times[idx]);
        let (pa, pb) = (&self.poses[idx - 1], &self.poses[idx]);
        let a = (t - ta) / (tb - ta);
        let lerp = |x: f64, y: f64| x + (y - x) * a;
        Some(WorldPose::new(
            WorldPoint::new(
                lerp(pa.position.east, pb.position.east),
                lerp(pa.position.north, pb.position.north),
                lerp(pa.position.up, pb.position.up),
            ),
            pa.heading + wrap_angle(pb.heading - pa.heading) * a,
            lerp(pa.pitch, pb.pitch),
            lerp(pa.roll, pb.roll),
        ))
    }
}

/// Project a world polyline through a camera into the canonical per-row image
/// path form.
///
/// Segments are adaptively subdivided until consecutive projections are at
/// most one pixel apart; the first (nearest along the polyline) crossing of
/// each integer image row wins.
pub fn project_world_polyline(
    cam: &CameraModel,
    cam_id: CameraId,
    pose: &WorldPose,
    vertices: &[WorldPoint],
) -> Result<ImagePath, NoVisiblePath> {
    let mut dense: Vec<ImagePoint> = Vec::new();
    let project = |p: &WorldPoint| project_point(cam, pose, p).ok();

    for w in vertices.windows(2) {
        subdivide(cam, pose, &w[0], project(&w[0]), &w[1], project(&w[1]), 0, &mut dense);
    }
    if vertices.len() == 1 {
        if let Some(pt) = project(&vertices[0]) {
            dense.push(pt);
        }
    }
    // Last vertex is never emitted by the recursion.
    if let Some(last) = vertices.last() {
        if vertices.len() > 1 {
            if let Some(pt) = project(last) {
                dense.push(pt);
            }
        }
    }
    if dense.is_empty() {
        return Err(NoVisiblePath);
    }

    // Canonical per-row form: walking near-to-far, record the first crossing
    // of each integer row.
    let mut by_row: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    let mut insert = |v: f64, u: f64| {
        if v < 0.0 {
            return;
        }
        let row = v.round();
        if (v - row).abs() < 1e-9 && row >= 0.0 && row < cam.height as f64 {
            by_row.entry(row as u32).or_insert(u);
        }
    };
    insert(dense[0].v, dense[0].u);
    for pair in dense.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if (a.v - b.v).abs() < 1e-12 {
            continue;
        }
        let (lo, hi) = if a.v < b.v { (a.v, b.v) } else { (b.v, a.v) };
        let mut r = lo.ceil();
        while r <= hi.floor() {
            let t = (r - a.v) / (b.v - a.v);
            if (0.0..=1.0).contains(&t) {
                let u = a.u + t * (b.u - a.u);
                insert(r, u);
            }
            r += 1.0;
        }
    }

    let entries: Vec<PathEntry> = by_row
        .into_iter()
        .map(|(row, col)| PathEntry { row, col, confidence: 1.0 })
        .collect();
    if entries.is_empty() {
        return Err(NoVisiblePath);
    }
    Ok(ImagePath::new(entries, cam_id))
}

fn subdivide(
    cam: &CameraModel,
    pose: &WorldPose,
    wa: &WorldPoint,
    pa: Option<ImagePoint>,
    wb: &WorldPoint,
    pb: Option<ImagePoint>,
    depth: u32,
    out: &mut Vec<ImagePoint>,
) {
    const MAX_DEPTH: u32 = 22;
    if let (Some(a), Some(b)) = (pa, pb) {
        if (a.u - b.u).hypot(a.v - b.v) <= 1.0 {
            out.push(a);
            return;
        }
    }
    if pa.is_none() && pb.is_none() && depth > 6 {
        // Both ends invisible and already well subdivided: give up on this
        // span (it may still straddle a visible sliver at shallower depths).
        return;
    }
    if depth >= MAX_DEPTH {
        if let Some(a) = pa {
            out.push(a);
        }
        return;
    }
    let mid = WorldPoint::from_vector((wa.as_vector() + wb.as_vector()) * 0.5);
    let pm = project_point(cam, pose, &mid).ok();
    subdivide(cam, pose, wa, pa, &mid, pm, depth + 1, out);
    subdivide(cam, pose, &mid, pm, wb, pb, depth + 1, out);
}

/// Project the recorded path into one frame.
///
/// Only the portion from the nearest path point forward by `lookahead`
/// meters is used; visible projections are densified to ≤ 1 px spacing and
/// reduced to one entry per covered image row.
pub fn project_path(
    frame: &FrameRecord,
    path: &PathPolyline,
    lookahead: f64,
) -> Result<ImagePath, NoVisiblePath> {
    let s0 = path.nearest_arc(&frame.pose.position);
    let vertices = path.slice_forward(s0, lookahead);
    if vertices.len() < 2 {
        return Err(NoVisiblePath);
    }
    project_world_polyline(&frame.camera, CameraId::Front, &frame.pose, &vertices)
}
