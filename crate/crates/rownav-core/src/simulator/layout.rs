//! Vineyard layouts: vine rows as world line segments, with traversal
//! corridors between adjacent rows.

use crate::geometry::{fold_half_circle, WorldPoint};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nominal robot width; corridor spacing must exceed it.
pub const ROBOT_WIDTH: f64 = 0.7;

/// Maximum pairwise direction spread for rows to count as near-parallel.
pub const MAX_ROW_SKEW_DEG: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("layout needs at least two rows, got {0}")]
    TooFewRows(usize),
    #[error("rows {a} and {b} diverge by {deg:.2}°, exceeding {MAX_ROW_SKEW_DEG}°")]
    RowsNotParallel { a: usize, b: usize, deg: f64 },
    #[error("row spacing {0} m does not clear the robot width {ROBOT_WIDTH} m")]
    SpacingTooNarrow(f64),
}

/// A directed line segment in the world plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowSegment {
    pub start: WorldPoint,
    pub end: WorldPoint,
}

impl RowSegment {
    pub fn new(start: WorldPoint, end: WorldPoint) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        self.start.planar_distance(&self.end)
    }

    /// Direction angle of the segment, CCW from east.
    pub fn direction(&self) -> f64 {
        (self.end.north - self.start.north).atan2(self.end.east - self.start.east)
    }

    /// Signed lateral offset of `p` from the infinite line through the
    /// segment (left of the segment direction is positive).
    pub fn lateral_offset(&self, p: &WorldPoint) -> f64 {
        let (s, c) = self.direction().sin_cos();
        let dx = p.east - self.start.east;
        let dy = p.north - self.start.north;
        -s * dx + c * dy
    }

    /// Arc-length parameter of `p` projected onto the segment axis
    /// (unclamped; 0 at `start`).
    pub fn along_offset(&self, p: &WorldPoint) -> f64 {
        let (s, c) = self.direction().sin_cos();
        let dx = p.east - self.start.east;
        let dy = p.north - self.start.north;
        c * dx + s * dy
    }

    pub fn point_at(&self, s: f64) -> WorldPoint {
        let (sn, cs) = self.direction().sin_cos();
        WorldPoint::new(self.start.east + cs * s, self.start.north + sn * s, self.start.up)
    }

    pub fn reversed(&self) -> Self {
        Self { start: self.end, end: self.start }
    }
}

/// Vine rows as near-parallel world line segments. Traversal corridors lie
/// between adjacent rows; corridor `i` runs midway between rows `i` and
/// `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineyardLayout {
    pub name: String,
    pub rows: Vec<RowSegment>,
    pub row_spacing: f64,
    /// Terrain slope, carried as metadata; the kinematic world lives in the
    /// (possibly inclined) ground plane itself.
    pub slope: f64,
}

impl VineyardLayout {
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.rows.len() < 2 {
            return Err(LayoutError::TooFewRows(self.rows.len()));
        }
        if self.row_spacing <= ROBOT_WIDTH {
            return Err(LayoutError::SpacingTooNarrow(self.row_spacing));
        }
        for i in 0..self.rows.len() {
            for j in (i + 1)..self.rows.len() {
                let d = fold_half_circle(self.rows[i].direction() - self.rows[j].direction())
                    .abs()
                    .to_degrees();
                if d >= MAX_ROW_SKEW_DEG {
                    return Err(LayoutError::RowsNotParallel { a: i, b: j, deg: d });
                }
            }
        }
        Ok(())
    }

    pub fn corridor_count(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// Centerline of corridor `i`, midway between rows `i` and `i + 1`,
    /// oriented like row `i`.
    pub fn corridor(&self, i: usize) -> RowSegment {
        let a = &self.rows[i];
        let b = &self.rows[i + 1];
        // Pair endpoints respecting orientation.
        let (b_start, b_end) =
            if fold_half_circle(a.direction() - b.direction()).abs() < std::f64::consts::FRAC_PI_2
                && (a.direction() - b.direction()).cos() > 0.0
            {
                (b.start, b.end)
            } else {
                (b.end, b.start)
            };
        RowSegment::new(
            WorldPoint::new(
                0.5 * (a.start.east + b_start.east),
                0.5 * (a.start.north + b_start.north),
                0.5 * (a.start.up + b_start.up),
            ),
            WorldPoint::new(
                0.5 * (a.end.east + b_end.east),
                0.5 * (a.end.north + b_end.north),
                0.5 * (a.end.up + b_end.up),
            ),
        )
    }

    pub fn corridors(&self) -> Vec<RowSegment> {
        (0..self.corridor_count()).map(|i| self.corridor(i)).collect()
    }

    /// Rows laid out parallel from `origin`, advancing `spacing` along the
    /// left normal of `direction`.
    pub fn parallel(
        name: &str,
        n_rows: usize,
        length: f64,
        spacing: f64,
        origin: WorldPoint,
        direction: f64,
        slope: f64,
    ) -> Self {
        let (s, c) = direction.sin_cos();
        let rows = (0..n_rows)
            .map(|k| {
                let off = k as f64 * spacing;
                let start =
                    WorldPoint::new(origin.east - s * off, origin.north + c * off, origin.up);
                let end = WorldPoint::new(start.east + c * length, start.north + s * length, start.up);
                RowSegment::new(start, end)
            })
            .collect();
        Self { name: name.to_string(), rows, row_spacing: spacing, slope }
    }

    /// 120 m rows on a ~10° slope, east-west; five vine rows, four corridors.
    pub fn crt() -> Self {
        Self::parallel("CRT", 5, 120.0, 2.7, WorldPoint::new(0.0, 0.0, 0.0), 0.0, 10f64.to_radians())
    }

    /// 90 m rows on the same slope, east-west.
    pub fn vg3() -> Self {
        Self::parallel("VG3", 5, 90.0, 2.7, WorldPoint::new(0.0, 0.0, 0.0), 0.0, 10f64.to_radians())
    }

    /// 70 m rows on flat ground, oriented north-south.
    pub fn rn() -> Self {
        Self::parallel(
            "RN",
            5,
            70.0,
            2.7,
            WorldPoint::new(0.0, 0.0, 0.0),
            std::f64::consts::FRAC_PI_2,
            0.0,
        )
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "crt" => Some(Self::crt()),
            "vg3" => Some(Self::vg3()),
            "rn" => Some(Self::rn()),
            _ => None,
        }
    }
}
