//! Geometry-backed heatmap provider standing in for a trained path-detection
//! model.
//!
//! The provider renders the true corridor centerline through the projection
//! pipeline, perturbed by a heading-bin-dependent angular error and a lateral
//! error calibrated to the measured detection accuracy, and refuses views
//! more than 25° off the row direction.

use crate::annotation::{project_world_polyline, render_heatmap, Heatmap, DEFAULT_SIGMA};
use crate::geometry::{fold_half_circle, CameraId, CameraModel, WorldPoint, WorldPose};
use crate::perception::{DetectionInvalid, HeatmapProvider, Observation};
use crate::simulator::{NoiseSpec, VineyardLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Views beyond this many degrees off the row direction yield
/// [`DetectionInvalid`].
pub const DETECTION_VALIDITY_DEG: f64 = 25.0;

/// Tunables of the synthetic provider.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    /// Forward extent of centerline rendered, meters.
    pub lookahead: f64,
    /// Centerline rendered slightly behind the sightline foot, meters.
    pub back_margin: f64,
    /// Corridor capture half-width as a fraction of row spacing.
    pub capture_factor: f64,
    /// How far past a corridor's ends the camera may sit and still lock it.
    pub longitudinal_margin: f64,
    /// Corridor excluded from candidate selection (fault-injection hook).
    pub excluded_corridor: Option<usize>,
    /// Multiplier on angular/lateral noise (fault-injection hook).
    pub noise_scale: f64,
    /// Unconditionally drop this observation (fault-injection hook).
    pub force_dropout: bool,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            lookahead: 20.0,
            back_margin: 1.0,
            capture_factor: 0.75,
            longitudinal_margin: 15.0,
            excluded_corridor: None,
            noise_scale: 1.0,
            force_dropout: false,
        }
    }
}

/// Angular noise std (degrees) for a signed view-heading error, from the
/// per-bin calibration table.
pub fn heading_noise_std(noise: &NoiseSpec, heading_error_deg: f64) -> f64 {
    let e = heading_error_deg;
    let idx = if e < -15.0 {
        0
    } else if e < -5.0 {
        1
    } else if e < 5.0 {
        2
    } else if e < 15.0 {
        3
    } else {
        4
    };
    noise.heading_bin_stds[idx]
}

/// Draw one angular perturbation (degrees) for a view at the given signed
/// heading error. Zero-std bins still consume one draw so streams stay
/// aligned when noise is disabled.
pub fn draw_heading_noise<R: Rng>(noise: &NoiseSpec, heading_error_deg: f64, rng: &mut R) -> f64 {
    let std = heading_noise_std(noise, heading_error_deg);
    draw_gauss(rng, std)
}

fn draw_gauss<R: Rng>(rng: &mut R, std: f64) -> f64 {
    if std <= 0.0 {
        let _ = rng.random::<f64>();
        return 0.0;
    }
    Normal::new(0.0, std).expect("valid std").sample(rng)
}

struct CorridorPick {
    index: usize,
    heading_error_deg: f64,
    /// Sightline foot parameter along the corridor segment.
    foot_s: f64,
    /// +1 when the view runs with the segment direction, -1 against it.
    view_sign: f64,
}

fn pick_corridor(
    layout: &VineyardLayout,
    camera_pos: &WorldPoint,
    view_heading: f64,
    opts: &SyntheticOptions,
) -> Option<CorridorPick> {
    let capture = opts.capture_factor * layout.row_spacing;
    let mut best: Option<(f64, CorridorPick)> = None;
    for i in 0..layout.corridor_count() {
        if opts.excluded_corridor == Some(i) {
            continue;
        }
        let seg = layout.corridor(i);
        let err = fold_half_circle(view_heading - seg.direction());
        if err.abs().to_degrees() > DETECTION_VALIDITY_DEG {
            continue;
        }
        let lateral = seg.lateral_offset(camera_pos);
        if lateral.abs() > capture {
            continue;
        }
        let s = seg.along_offset(camera_pos);
        if s < -opts.longitudinal_margin || s > seg.length() + opts.longitudinal_margin {
            continue;
        }
        let view_sign = if (view_heading - seg.direction()).cos() >= 0.0 { 1.0 } else { -1.0 };
        let pick = CorridorPick {
            index: i,
            heading_error_deg: err.to_degrees(),
            foot_s: s.clamp(0.0, seg.length()),
            view_sign,
        };
        if best.as_ref().is_none_or(|(d, _)| lateral.abs() < *d) {
            best = Some((lateral.abs(), pick));
        }
    }
    best.map(|(_, p)| p)
}

/// Render the synthetic path-preference heatmap for one camera view.
///
/// The corridor in view is chosen by direction, lateral capture and
/// longitudinal overlap (smallest lateral offset wins); its centerline,
/// perturbed by the calibrated angular and lateral noise, is projected and
/// rendered exactly like a ground-truth annotation. Dropouts return an
/// all-zero heatmap. Fixed seeds reproduce bit-identical output.
pub fn synthetic_heatmap(
    layout: &VineyardLayout,
    pose: &WorldPose,
    cam: &CameraModel,
    cam_id: CameraId,
    noise: &NoiseSpec,
    seed: u64,
    opts: &SyntheticOptions,
) -> Result<Heatmap, DetectionInvalid> {
    let view = pose.heading + cam_id.mount_yaw();
    let mount_pos = cam.mount.inverse().translation;
    let (sh, ch) = pose.heading.sin_cos();
    let camera_pos = WorldPoint::new(
        pose.position.east + ch * mount_pos.x - sh * mount_pos.y,
        pose.position.north + sh * mount_pos.x + ch * mount_pos.y,
        pose.position.up,
    );

    let pick = pick_corridor(layout, &camera_pos, view, opts).ok_or(DetectionInvalid)?;
    let seg = layout.corridor(pick.index);
    let (w, h) = cam.heatmap_size();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dropout_draw = rng.random::<f64>();
    let angular_deg = draw_heading_noise(noise, pick.heading_error_deg, &mut rng) * opts.noise_scale;
    let lateral = draw_gauss(&mut rng, noise.lateral_std) * opts.noise_scale;
    if opts.force_dropout || dropout_draw < noise.dropout_prob {
        return Ok(Heatmap::zeros(w, h));
    }

    // Visible span of the centerline in view-aligned arc length around the
    // sightline foot, clamped to the segment extent.
    let len = seg.length();
    let (t_lo, t_hi) = if pick.view_sign > 0.0 {
        ((-opts.back_margin).max(-pick.foot_s), opts.lookahead.min(len - pick.foot_s))
    } else {
        ((-opts.back_margin).max(pick.foot_s - len), opts.lookahead.min(pick.foot_s))
    };
    if t_hi - t_lo < 0.5 {
        return Err(DetectionInvalid);
    }

    // Perturbed sightline direction and pivot.
    let dir = seg.direction() + if pick.view_sign > 0.0 { 0.0 } else { std::f64::consts::PI };
    let dir_rot = dir + angular_deg.to_radians();
    let pivot = seg.point_at(pick.foot_s);
    let (sd, cd) = dir_rot.sin_cos();
    let (sn, cn) = (dir + std::f64::consts::FRAC_PI_2).sin_cos();

    let mut vertices = Vec::new();
    let mut t = t_lo;
    while t < t_hi {
        vertices.push(WorldPoint::new(
            pivot.east + cd * t + cn * lateral,
            pivot.north + sd * t + sn * lateral,
            pivot.up,
        ));
        t += 1.0;
    }
    vertices.push(WorldPoint::new(
        pivot.east + cd * t_hi + cn * lateral,
        pivot.north + sd * t_hi + sn * lateral,
        pivot.up,
    ));

    match project_world_polyline(cam, cam_id, pose, &vertices) {
        Ok(path) => Ok(render_heatmap(&path, (w, h), DEFAULT_SIGMA)),
        // A validly picked corridor that still projects nowhere reads as a
        // blank detection, not an invalid view.
        Err(_) => Ok(Heatmap::zeros(w, h)),
    }
}

/// [`HeatmapProvider`] wrapping [`synthetic_heatmap`] for one camera.
#[derive(Debug, Clone)]
pub struct SyntheticHeatmapProvider {
    camera_id: CameraId,
    model: CameraModel,
    layout: VineyardLayout,
    noise: NoiseSpec,
    base_seed: u64,
    opts: SyntheticOptions,
}

impl SyntheticHeatmapProvider {
    pub fn new(
        camera_id: CameraId,
        model: CameraModel,
        layout: VineyardLayout,
        noise: NoiseSpec,
        base_seed: u64,
    ) -> Self {
        Self { camera_id, model, layout, noise, base_seed, opts: SyntheticOptions::default() }
    }

    pub fn options_mut(&mut self) -> &mut SyntheticOptions {
        &mut self.opts
    }

    pub fn options(&self) -> &SyntheticOptions {
        &self.opts
    }

    /// Per-observation seed: a fixed mix of trial seed, tick and camera, so
    /// provider calls are reproducible regardless of call order.
    fn seed_for(&self, tick: u64) -> u64 {
        splitmix64(
            self.base_seed ^ tick.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((self.camera_id as u64) << 56),
        )
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl HeatmapProvider for SyntheticHeatmapProvider {
    fn camera(&self) -> CameraId {
        self.camera_id
    }

    fn resolution(&self) -> (u32, u32) {
        self.model.heatmap_size()
    }

    fn heatmap(&self, obs: &Observation) -> Result<Heatmap, DetectionInvalid> {
        synthetic_heatmap(
            &self.layout,
            &obs.pose,
            &self.model,
            self.camera_id,
            &self.noise,
            self.seed_for(obs.tick),
            &self.opts,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::extract_path;

    fn mid_corridor_pose(layout: &VineyardLayout, heading_err_deg: f64) -> WorldPose {
        let c = layout.corridor(0);
        WorldPose::planar(60.0, c.start.north, c.direction() + heading_err_deg.to_radians())
    }

    #[test]
    fn zero_noise_argmax_matches_true_centerline() {
        let layout = VineyardLayout::crt();
        let pose = mid_corridor_pose(&layout, 0.0);
        let cam = CameraModel::default_for(CameraId::Front);
        let hm = synthetic_heatmap(
            &layout,
            &pose,
            &cam,
            CameraId::Front,
            &NoiseSpec::zero(),
            9,
            &SyntheticOptions::default(),
        )
        .unwrap();
        let path = extract_path(&hm, 0.5, CameraId::Front).unwrap();
        // Robot is on the centerline: the extracted path runs down the
        // center column at every row.
        for e in path.entries() {
            assert!(
                (e.col - 159.5).abs() <= 1.0,
                "row {}: extracted col {} off center",
                e.row,
                e.col
            );
        }
    }

    #[test]
    fn thirty_degree_error_is_invalid() {
        let layout = VineyardLayout::crt();
        let pose = mid_corridor_pose(&layout, 30.0);
        let cam = CameraModel::default_for(CameraId::Front);
        let r = synthetic_heatmap(
            &layout,
            &pose,
            &cam,
            CameraId::Front,
            &NoiseSpec::zero(),
            9,
            &SyntheticOptions::default(),
        );
        assert_eq!(r, Err(DetectionInvalid));
    }

    #[test]
    fn validity_window_boundary() {
        let layout = VineyardLayout::crt();
        let cam = CameraModel::default_for(CameraId::Front);
        for (err, ok) in [(0.0, true), (24.9, true), (-24.9, true), (25.5, false), (-25.5, false), (90.0, false)] {
            let pose = mid_corridor_pose(&layout, err);
            let r = synthetic_heatmap(
                &layout,
                &pose,
                &cam,
                CameraId::Front,
                &NoiseSpec::zero(),
                3,
                &SyntheticOptions::default(),
            );
            assert_eq!(r.is_ok(), ok, "heading error {err}°");
        }
    }

    #[test]
    fn looking_backward_is_valid() {
        // 180° off the row direction folds to zero error: the back camera
        // tracks the corridor behind.
        let layout = VineyardLayout::crt();
        let pose = mid_corridor_pose(&layout, 0.0);
        let cam = CameraModel::default_for(CameraId::Back);
        let r = synthetic_heatmap(
            &layout,
            &pose,
            &cam,
            CameraId::Back,
            &NoiseSpec::zero(),
            3,
            &SyntheticOptions::default(),
        );
        assert!(r.is_ok());
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let layout = VineyardLayout::crt();
        let pose = mid_corridor_pose(&layout, 4.0);
        let cam = CameraModel::default_for(CameraId::Front);
        let noise = NoiseSpec::default();
        let opts = SyntheticOptions::default();
        let a = synthetic_heatmap(&layout, &pose, &cam, CameraId::Front, &noise, 77, &opts).unwrap();
        let b = synthetic_heatmap(&layout, &pose, &cam, CameraId::Front, &noise, 77, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bin_lookup_matches_table() {
        let noise = NoiseSpec::default();
        assert_eq!(heading_noise_std(&noise, -25.0), 2.36);
        assert_eq!(heading_noise_std(&noise, -15.0), 2.22);
        assert_eq!(heading_noise_std(&noise, -5.0), 1.10);
        assert_eq!(heading_noise_std(&noise, 0.0), 1.10);
        assert_eq!(heading_noise_std(&noise, 5.0), 1.57);
        assert_eq!(heading_noise_std(&noise, 15.0), 8.05);
        assert_eq!(heading_noise_std(&noise, 25.0), 8.05);
    }

    #[test]
    fn centering_offset_crosses_zero_at_alignment() {
        // Emulate the end-of-row turn: robot pivoting at the corridor 0 east
        // end, left camera watching the completed corridor. The centering
        // offset must change sign exactly where the side camera axis aligns
        // with the row direction (within 1°).
        use crate::perception::{extract_path, path_centering_offset};
        let layout = VineyardLayout::crt();
        let c0 = layout.corridor(0);
        let cam = CameraModel::default_for(CameraId::Left);
        let opts = SyntheticOptions::default();

        let offset_at = |heading: f64| -> Option<f64> {
            let pose = WorldPose::new(c0.end, heading, 0.0, 0.0);
            let hm = synthetic_heatmap(
                &layout,
                &pose,
                &cam,
                CameraId::Left,
                &NoiseSpec::zero(),
                1,
                &opts,
            )
            .ok()?;
            let path = extract_path(&hm, 0.3, CameraId::Left).ok()?;
            Some(path_centering_offset(&path, hm.width()))
        };

        // Left camera aligns with the completed row (looking back west) at
        // heading exactly 90°.
        let aligned = std::f64::consts::FRAC_PI_2;
        let mut crossing = None;
        let mut prev: Option<(f64, f64)> = None;
        let mut h = aligned - 15f64.to_radians();
        while h <= aligned + 15f64.to_radians() {
            if let Some(o) = offset_at(h) {
                if let Some((ph, po)) = prev {
                    if po.signum() != o.signum() {
                        crossing = Some(0.5 * (ph + h));
                        break;
                    }
                }
                prev = Some((h, o));
            }
            h += 0.1f64.to_radians();
        }
        let crossing = crossing.expect("offset never crossed zero");
        assert!(
            (crossing - aligned).abs() < 1f64.to_radians(),
            "offset zero at heading {:.2}°, alignment at {:.2}°",
            crossing.to_degrees(),
            aligned.to_degrees()
        );
    }

    #[test]
    fn excluded_corridor_locks_neighbor_or_fails() {
        let layout = VineyardLayout::crt();
        let c0 = layout.corridor(0);
        // Robot on corridor 0; with corridor 0 excluded, the provider must
        // not silently render it.
        let pose = WorldPose::planar(60.0, c0.start.north, c0.direction());
        let cam = CameraModel::default_for(CameraId::Front);
        let opts = SyntheticOptions { excluded_corridor: Some(0), ..SyntheticOptions::default() };
        let r = synthetic_heatmap(&layout, &pose, &cam, CameraId::Front, &NoiseSpec::zero(), 3, &opts);
        if let Ok(hm) = r {
            let path = extract_path(&hm, 0.5, CameraId::Front).unwrap();
            // Any detection must sit well off center (the neighbor corridor).
            let off = crate::perception::path_centering_offset(&path, hm.width());
            assert!(off.abs() > 0.2, "excluded corridor still rendered centered");
        }
    }
}
