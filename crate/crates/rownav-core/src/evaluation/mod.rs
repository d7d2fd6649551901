//! Trajectory analysis: positional and heading deviations against the
//! pre-surveyed corridor paths, partitioned by the end-of-row circles.

use crate::geometry::{wrap_angle, WorldPoint};
use crate::navigator::MissionPlan;
use crate::simulator::{RowSegment, RtkFix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radius of the end-of-row discs used to partition samples.
pub const END_REGION_RADIUS: f64 = 12.0;

/// Displacements below this are too small for a heading estimate.
pub const STATIONARY_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("displacement too small for a heading sample")]
pub struct StationarySegment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    RowTracking,
    Exiting,
    Entering,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::RowTracking, Region::Exiting, Region::Entering];

    pub fn label(&self) -> &'static str {
        match self {
            Region::RowTracking => "row_tracking",
            Region::Exiting => "exiting",
            Region::Entering => "entering",
        }
    }
}

/// One evaluated trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSample {
    pub time: f64,
    pub positional: f64,
    /// Present only on the 1 Hz downsampled grid.
    pub heading_deg: Option<f64>,
    pub region: Region,
}

/// Signed perpendicular distance from `p` to the directed row segment:
/// magnitude is the point-to-segment distance (clamped to the endpoints),
/// sign is positive left of the travel direction.
pub fn positional_deviation(p: &WorldPoint, row: &RowSegment) -> f64 {
    let s = row.along_offset(p).clamp(0.0, row.length());
    let closest = row.point_at(s);
    let dist = p.planar_distance(&closest);
    if row.lateral_offset(p) >= 0.0 {
        dist
    } else {
        -dist
    }
}

/// Heading deviation (degrees, wrapped to ±180°) between the displacement of
/// consecutive downsampled fixes and the row direction.
pub fn heading_deviation(
    prev: &WorldPoint,
    cur: &WorldPoint,
    row_direction: f64,
) -> Result<f64, StationarySegment> {
    let de = cur.east - prev.east;
    let dn = cur.north - prev.north;
    if de.hypot(dn) < STATIONARY_THRESHOLD {
        return Err(StationarySegment);
    }
    Ok(wrap_angle(dn.atan2(de) - row_direction).to_degrees())
}

/// Per-region statistics in the trial-table convention: mean and std of
/// |deviation|, plus the extreme sample's signed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub mean_abs: f64,
    pub std_abs: f64,
    pub signed_max: f64,
    pub count: usize,
}

impl RegionStats {
    fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
        let var = samples.iter().map(|x| (x.abs() - mean).powi(2)).sum::<f64>() / n;
        let signed_max = samples
            .iter()
            .copied()
            .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap();
        Some(Self { mean_abs: mean, std_abs: var.sqrt(), signed_max, count: samples.len() })
    }

    pub fn cell(&self) -> String {
        format!("{:.2} ± {:.2}, {:.2}", self.mean_abs, self.std_abs, self.signed_max)
    }
}

/// Per-trial summary in the trajectory-analysis table layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub positional: [Option<RegionStats>; 3],
    pub heading: [Option<RegionStats>; 3],
    pub interventions: u32,
}

impl TrialSummary {
    pub fn positional_for(&self, r: Region) -> Option<&RegionStats> {
        self.positional[region_index(r)].as_ref()
    }

    pub fn heading_for(&self, r: Region) -> Option<&RegionStats> {
        self.heading[region_index(r)].as_ref()
    }
}

fn region_index(r: Region) -> usize {
    match r {
        Region::RowTracking => 0,
        Region::Exiting => 1,
        Region::Entering => 2,
    }
}

fn nearest_row<'a>(plan: &'a MissionPlan, p: &WorldPoint) -> &'a crate::navigator::PlannedRow {
    plan.rows
        .iter()
        .min_by(|a, b| {
            let da = positional_deviation(p, &a.segment()).abs();
            let db = positional_deviation(p, &b.segment()).abs();
            da.partial_cmp(&db).unwrap()
        })
        .expect("plan has rows")
}

/// Region of one sample: inside a 12 m endpoint disc it is exiting when the
/// motion heads toward that endpoint, entering when it heads away; everywhere
/// else it is row tracking.
pub fn assign_region(p: &WorldPoint, motion: (f64, f64), plan: &MissionPlan) -> Region {
    let mut best: Option<(f64, WorldPoint)> = None;
    for row in &plan.rows {
        for endpoint in [row.start, row.end] {
            let d = p.planar_distance(&endpoint);
            if d < END_REGION_RADIUS && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, endpoint));
            }
        }
    }
    match best {
        None => Region::RowTracking,
        Some((_, endpoint)) => {
            let toward = (endpoint.east - p.east) * motion.0 + (endpoint.north - p.north) * motion.1;
            if toward > 0.0 {
                Region::Exiting
            } else {
                Region::Entering
            }
        }
    }
}

/// Evaluate a fix track against the plan.
///
/// Positional deviations are computed per fix against the nearest planned
/// row; heading deviations on the track downsampled by `stride` (10 Hz
/// source and stride 10 give the 1 Hz convention). Every sample gets exactly
/// one region.
pub fn deviation_samples(fixes: &[RtkFix], plan: &MissionPlan, stride: usize) -> Vec<DeviationSample> {
    assert!(stride > 0);
    let motion_at = |i: usize| -> (f64, f64) {
        let (a, b) = if i + 1 < fixes.len() {
            (&fixes[i], &fixes[i + 1])
        } else if i > 0 {
            (&fixes[i - 1], &fixes[i])
        } else {
            return (1.0, 0.0);
        };
        (b.position.east - a.position.east, b.position.north - a.position.north)
    };

    let mut heading_at: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let mut k = 0;
    while k + stride < fixes.len() {
        let row = nearest_row(plan, &fixes[k].position);
        if let Ok(dev) = heading_deviation(
            &fixes[k].position,
            &fixes[k + stride].position,
            row.direction(),
        ) {
            heading_at.insert(k, dev);
        }
        k += stride;
    }

    fixes
        .iter()
        .enumerate()
        .map(|(i, fix)| {
            let row = nearest_row(plan, &fix.position);
            DeviationSample {
                time: fix.timestamp,
                positional: positional_deviation(&fix.position, &row.segment()),
                heading_deg: heading_at.get(&i).copied(),
                region: assign_region(&fix.position, motion_at(i), plan),
            }
        })
        .collect()
}

/// Summarize a fix track into the per-region table statistics.
pub fn summarize(
    fixes: &[RtkFix],
    plan: &MissionPlan,
    interventions: u32,
    stride: usize,
) -> TrialSummary {
    let samples = deviation_samples(fixes, plan, stride);
    let mut pos: [Vec<f64>; 3] = Default::default();
    let mut head: [Vec<f64>; 3] = Default::default();
    for s in &samples {
        pos[region_index(s.region)].push(s.positional);
        if let Some(h) = s.heading_deg {
            head[region_index(s.region)].push(h);
        }
    }
    TrialSummary {
        positional: [
            RegionStats::from_samples(&pos[0]),
            RegionStats::from_samples(&pos[1]),
            RegionStats::from_samples(&pos[2]),
        ],
        heading: [
            RegionStats::from_samples(&head[0]),
            RegionStats::from_samples(&head[1]),
            RegionStats::from_samples(&head[2]),
        ],
        interventions,
    }
}

/// Render the summary in the trajectory-analysis table style.
pub fn render_table(label: &str, summary: &TrialSummary) -> String {
    let cell = |s: &Option<RegionStats>| s.as_ref().map(|x| x.cell()).unwrap_or_else(|| "-".into());
    let mut out = String::new();
    out.push_str(
        "            #Int  Positional deviation (mean ± std, max)(m)                          Heading deviation (mean ± std, max)(°)\n",
    );
    out.push_str(
        "                  Row tracking        Exiting             Entering            Row tracking        Exiting             Entering\n",
    );
    out.push_str(&format!(
        "{label:<11} {:<5} {:<19} {:<19} {:<19} {:<19} {:<19} {:<19}\n",
        summary.interventions,
        cell(&summary.positional[0]),
        cell(&summary.positional[1]),
        cell(&summary.positional[2]),
        cell(&summary.heading[0]),
        cell(&summary.heading[1]),
        cell(&summary.heading[2]),
    ));
    out
}
