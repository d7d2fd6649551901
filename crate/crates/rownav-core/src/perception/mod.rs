//! Heatmap-to-path extraction and the pluggable heatmap-provider interface.

mod depth;
mod synthetic;

pub use depth::{detect_row_end, DepthProfile, DepthSample, InsufficientDepth, RunningMedian,
    DEPTH_MIN_SAMPLES};
pub use synthetic::{
    draw_heading_noise, heading_noise_std, synthetic_heatmap, SyntheticHeatmapProvider,
    SyntheticOptions, DETECTION_VALIDITY_DEG,
};

use crate::annotation::Heatmap;
use crate::geometry::{CameraId, ImagePoint, WorldPose};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum surviving rows for an extraction to count as a detection.
pub const MIN_PATH_ROWS: usize = 40;

/// Default confidence floor below which a heatmap row is ignored.
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.2;

/// No usable path in the heatmap; the controller holds its last command and
/// the state machine handles the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no usable path detected in heatmap")]
pub struct NoPath;

/// The view is outside the detection validity window; downstream must not
/// trust any path from this observation.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("view direction outside the detection validity window")]
pub struct DetectionInvalid;

/// One extracted path point: per-image-row argmax column with its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub row: u32,
    pub col: f64,
    pub confidence: f64,
}

/// A detected path in image coordinates: one entry per covered row, rows
/// strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePath {
    entries: Vec<PathEntry>,
    camera: CameraId,
}

impl ImagePath {
    pub fn new(entries: Vec<PathEntry>, camera: CameraId) -> Self {
        debug_assert!(
            entries.windows(2).all(|w| w[0].row < w[1].row),
            "image path rows must be strictly increasing"
        );
        Self { entries, camera }
    }

    pub fn entries(&self) -> &[PathEntry] {
        &self.entries
    }

    pub fn camera(&self) -> CameraId {
        self.camera
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries as image points, coordinates multiplied by `scale` (e.g. 2.0
    /// to lift a heatmap-resolution path to full image resolution).
    pub fn image_points_scaled(&self, scale: f64) -> Vec<ImagePoint> {
        self.entries
            .iter()
            .map(|e| ImagePoint::new(e.col * scale, e.row as f64 * scale))
            .collect()
    }
}

/// Per-row argmax path extraction.
///
/// For every heatmap row the argmax column is taken with the row's max value
/// as confidence (ties break to the smallest column); rows whose max falls
/// below `min_confidence` are omitted. Fails with [`NoPath`] when fewer than
/// [`MIN_PATH_ROWS`] rows survive. Output coordinates are in heatmap
/// resolution.
pub fn extract_path(
    heatmap: &Heatmap,
    min_confidence: f64,
    camera: CameraId,
) -> Result<ImagePath, NoPath> {
    let mut entries = Vec::new();
    for r in 0..heatmap.height() {
        let (c, v) = heatmap.row_argmax(r);
        if v >= min_confidence {
            entries.push(PathEntry { row: r, col: c as f64, confidence: v });
        }
    }
    if entries.len() < MIN_PATH_ROWS {
        return Err(NoPath);
    }
    Ok(ImagePath::new(entries, camera))
}

/// Signed horizontal offset of a path's depth-weighted mean column from the
/// image center, normalized by the half-width to `[-1, 1]`.
///
/// Without metric depth per entry, weight grows linearly toward the top of
/// the path (farther ground points), emphasizing the vanishing direction.
pub fn path_centering_offset(path: &ImagePath, image_width: u32) -> f64 {
    assert!(!path.is_empty());
    let center = (image_width as f64 - 1.0) / 2.0;
    let v_near = path.entries.last().expect("nonempty").row as f64;
    let mut wsum = 0.0;
    let mut acc = 0.0;
    for e in &path.entries {
        let w = 1.0 + (v_near - e.row as f64);
        wsum += w;
        acc += w * (e.col - center);
    }
    (acc / wsum / (image_width as f64 / 2.0)).clamp(-1.0, 1.0)
}

/// Per-camera observation handed to a heatmap provider.
///
/// A live deployment would carry an image handle here; the synthetic provider
/// consumes the true pose plus the tick index that seeds its noise stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub tick: u64,
    pub pose: WorldPose,
}

/// The extension point standing in for a trained path-detection model.
///
/// Contract: observation in, half-resolution heatmap out, within the frame
/// budget (≤ 66 ms at 15 FPS). Given identical observations a provider must
/// return an identical heatmap; stochastic providers must derive all
/// randomness from an explicit seed.
pub trait HeatmapProvider {
    fn camera(&self) -> CameraId;
    /// Heatmap (half-image) resolution.
    fn resolution(&self) -> (u32, u32);
    fn heatmap(&self, obs: &Observation) -> Result<Heatmap, DetectionInvalid>;
}
