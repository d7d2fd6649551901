//! Side-view depth profiles and end-of-row detection.
//!
//! Side depth stays near half the row spacing while the robot is inside a
//! corridor and jumps toward max range once the vine row ends; the detector
//! compares a robust per-profile depth against a running in-row baseline.

use crate::geometry::CameraId;
use thiserror::Error;

/// Minimum valid samples for a profile to support a row-end decision.
pub const DEPTH_MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("too few valid depth samples for a row-end decision")]
pub struct InsufficientDepth;

/// One ray of a side depth profile; `depth` is `None` for dropouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub bearing: f64,
    pub depth: Option<f64>,
}

/// A horizontal fan of depth measurements from one side camera.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthProfile {
    pub camera: CameraId,
    pub samples: Vec<DepthSample>,
}

impl DepthProfile {
    pub fn valid_count(&self) -> usize {
        self.samples.iter().filter(|s| s.depth.is_some()).count()
    }

    /// Robust (median) depth over valid samples.
    pub fn robust_depth(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.samples.iter().filter_map(|s| s.depth).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite depths"));
        Some(median_of_sorted(&v))
    }
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// True when the profile's robust depth exceeds `baseline * jump_ratio`.
///
/// `baseline` is the caller-maintained running median of in-row side depth.
/// The decision is monotone in depth: raising any sample never flips a
/// positive decision back to negative.
pub fn detect_row_end(
    profile: &DepthProfile,
    baseline: f64,
    jump_ratio: f64,
) -> Result<bool, InsufficientDepth> {
    if profile.valid_count() < DEPTH_MIN_SAMPLES {
        return Err(InsufficientDepth);
    }
    let robust = profile.robust_depth().expect("has valid samples");
    Ok(robust > baseline * jump_ratio)
}

/// Running median over a bounded window of recent scalar observations.
#[derive(Debug, Clone)]
pub struct RunningMedian {
    window: usize,
    buf: std::collections::VecDeque<f64>,
}

impl RunningMedian {
    pub fn new(window: usize) -> Self {
        assert!(window > 0);
        Self { window, buf: std::collections::VecDeque::with_capacity(window) }
    }

    pub fn push(&mut self, v: f64) {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(v);
    }

    pub fn median(&self) -> Option<f64> {
        if self.buf.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = self.buf.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        Some(median_of_sorted(&v))
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(depths: &[Option<f64>]) -> DepthProfile {
        DepthProfile {
            camera: CameraId::Left,
            samples: depths
                .iter()
                .enumerate()
                .map(|(i, d)| DepthSample { bearing: -0.4 + 0.025 * i as f64, depth: *d })
                .collect(),
        }
    }

    #[test]
    fn in_row_profile_does_not_fire() {
        let p = profile(&vec![Some(1.35); 32]);
        assert_eq!(detect_row_end(&p, 1.35, 1.8), Ok(false));
    }

    #[test]
    fn open_profile_fires() {
        let p = profile(&vec![Some(10.0); 32]);
        assert_eq!(detect_row_end(&p, 1.35, 1.8), Ok(true));
    }

    #[test]
    fn too_many_dropouts_defer_decision() {
        let mut d = vec![Some(10.0); 12];
        d.extend(vec![None; 20]);
        let p = profile(&d);
        assert_eq!(detect_row_end(&p, 1.35, 1.8), Err(InsufficientDepth));
    }

    #[test]
    fn detection_is_monotone_in_depth() {
        let base: Vec<Option<f64>> = (0..32).map(|i| Some(1.0 + 0.2 * (i % 5) as f64)).collect();
        let p = profile(&base);
        let fired = detect_row_end(&p, 1.0, 1.8).unwrap();
        for bump in [0.5, 2.0, 8.0] {
            let raised = profile(&base.iter().map(|d| d.map(|x| x + bump)).collect::<Vec<_>>());
            let fired_raised = detect_row_end(&raised, 1.0, 1.8).unwrap();
            assert!(fired_raised >= fired, "raising depths flipped the decision off");
        }
    }

    #[test]
    fn running_median_window() {
        let mut rm = RunningMedian::new(3);
        assert_eq!(rm.median(), None);
        rm.push(1.0);
        rm.push(9.0);
        rm.push(2.0);
        assert_eq!(rm.median(), Some(2.0));
        rm.push(10.0); // evicts 1.0 -> {9, 2, 10}
        assert_eq!(rm.median(), Some(9.0));
    }
}
