//! Dataset generation: per-frame heatmap annotation with a skip report, plus
//! the on-disk annotation log format.

use super::{project_path, render_heatmap, FrameRecord, Heatmap, PathPolyline, PoseTrack};
use crate::geometry::{CameraSpec, WorldPoint, WorldPose};
use serde::{Deserialize, Serialize};
use std::io;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed writing a heatmap: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// No path vertex projected into the frame.
    NoVisiblePath,
    /// Frame timestamp not bracketed by the pose track and path span.
    ClockSkew,
}

/// One manifest line per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub frame_id: u64,
    pub timestamp: f64,
    pub pose: Option<WorldPose>,
    pub camera: CameraSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heatmap_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<SkipReason>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn annotated(&self) -> usize {
        self.records.iter().filter(|r| r.heatmap_file.is_some()).count()
    }

    pub fn skipped(&self, reason: SkipReason) -> usize {
        self.records.iter().filter(|r| r.skip_reason == Some(reason)).count()
    }

    pub fn write_jsonl(&self, path: &Path) -> io::Result<()> {
        use io::Write;
        let mut f = std::fs::File::create(path)?;
        for r in &self.records {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Annotation parameters echoed into the dataset metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotateConfig {
    pub lookahead: f64,
    pub sigma: f64,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self { lookahead: super::DEFAULT_LOOKAHEAD, sigma: super::DEFAULT_SIGMA }
    }
}

/// A recorded frame awaiting pose association.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameStamp {
    pub frame_id: u64,
    #[serde(rename = "time")]
    pub timestamp: f64,
}

/// Annotate every frame against the recorded path.
///
/// Frame poses are linearly interpolated from the pose track; frames whose
/// timestamps fall outside the pose track or the path span skip with
/// `ClockSkew`, frames where nothing projects skip with `NoVisiblePath`.
/// `sink` persists each rendered heatmap and returns the stored file name.
/// Output is ordered by frame id and deterministic for fixed inputs.
pub fn build_dataset(
    frames: &[FrameStamp],
    poses: &PoseTrack,
    path: &PathPolyline,
    camera: &CameraSpec,
    cfg: &AnnotateConfig,
    mut sink: impl FnMut(u64, &Heatmap) -> io::Result<String>,
) -> Result<DatasetManifest, DatasetError> {
    let model = camera.to_model();
    let out_size = model.heatmap_size();
    let (path_t0, path_t1) = path.time_span();

    let mut ordered: Vec<FrameStamp> = frames.to_vec();
    ordered.sort_by_key(|f| f.frame_id);

    let mut records = Vec::with_capacity(ordered.len());
    for frame in &ordered {
        let t = frame.timestamp;
        let pose = poses.interpolate(t);
        let bracketed = pose.is_some() && t >= path_t0 && t <= path_t1;
        let Some(pose) = pose.filter(|_| bracketed) else {
            records.push(ManifestRecord {
                frame_id: frame.frame_id,
                timestamp: t,
                pose: None,
                camera: camera.clone(),
                heatmap_file: None,
                skip_reason: Some(SkipReason::ClockSkew),
            });
            continue;
        };

        let record = FrameRecord {
            frame_id: frame.frame_id,
            pose,
            camera: model.clone(),
            timestamp: t,
            extrapolated: false,
        };
        match project_path(&record, path, cfg.lookahead) {
            Ok(img_path) => {
                let heatmap = render_heatmap(&img_path, out_size, cfg.sigma);
                let file = sink(frame.frame_id, &heatmap)?;
                records.push(ManifestRecord {
                    frame_id: frame.frame_id,
                    timestamp: t,
                    pose: Some(pose),
                    camera: camera.clone(),
                    heatmap_file: Some(file),
                    skip_reason: None,
                });
            }
            Err(_) => records.push(ManifestRecord {
                frame_id: frame.frame_id,
                timestamp: t,
                pose: Some(pose),
                camera: camera.clone(),
                heatmap_file: None,
                skip_reason: Some(SkipReason::NoVisiblePath),
            }),
        }
    }
    Ok(DatasetManifest { records })
}

/// An annotation input log read from disk.
#[derive(Debug, Clone)]
pub struct AnnotationLog {
    pub frames: Vec<FrameStamp>,
    pub poses: PoseTrack,
    pub camera: CameraSpec,
}

#[derive(Debug, Deserialize)]
struct PoseLine {
    time: f64,
    east: f64,
    north: f64,
    up: f64,
    heading: f64,
    #[serde(default)]
    pitch: f64,
    #[serde(default)]
    roll: f64,
}

#[derive(Debug, Deserialize)]
struct PathFile {
    points: Vec<PathPointLine>,
}

#[derive(Debug, Deserialize)]
struct PathPointLine {
    time: f64,
    east: f64,
    north: f64,
    up: f64,
}

/// Read `frames.jsonl`, `poses.jsonl` and `camera.json` from a log directory.
pub fn read_annotation_log(dir: &Path) -> io::Result<AnnotationLog> {
    let frames_text = std::fs::read_to_string(dir.join("frames.jsonl"))?;
    let frames: Vec<FrameStamp> = frames_text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::other))
        .collect::<io::Result<_>>()?;

    let poses_text = std::fs::read_to_string(dir.join("poses.jsonl"))?;
    let mut times = Vec::new();
    let mut poses = Vec::new();
    for line in poses_text.lines().filter(|l| !l.trim().is_empty()) {
        let p: PoseLine = serde_json::from_str(line).map_err(io::Error::other)?;
        times.push(p.time);
        poses.push(WorldPose::new(
            WorldPoint::new(p.east, p.north, p.up),
            p.heading,
            p.pitch,
            p.roll,
        ));
    }
    let poses = PoseTrack::new(times, poses).map_err(io::Error::other)?;

    let camera_text = std::fs::read_to_string(dir.join("camera.json"))?;
    let camera: CameraSpec = serde_json::from_str(&camera_text).map_err(io::Error::other)?;
    Ok(AnnotationLog { frames, poses, camera })
}

/// Read a timestamped path file (`{"points": [{time, east, north, up}]}`).
pub fn read_path_file(path: &Path) -> io::Result<PathPolyline> {
    let text = std::fs::read_to_string(path)?;
    let parsed: PathFile = serde_json::from_str(&text).map_err(io::Error::other)?;
    let points = parsed
        .points
        .iter()
        .map(|p| WorldPoint::new(p.east, p.north, p.up))
        .collect();
    let times = parsed.points.iter().map(|p| p.time).collect();
    PathPolyline::new(points, times).map_err(io::Error::other)
}
