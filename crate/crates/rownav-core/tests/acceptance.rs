//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them on success).

use rownav_core::annotation::{
    project_path, render_heatmap, FrameRecord, PathPolyline, HEATMAP_SCALE,
};
use rownav_core::control::ControllerGains;
use rownav_core::evaluation::{summarize, Region, RegionStats, END_REGION_RADIUS};
use rownav_core::geometry::{
    fold_half_circle, wrap_angle, CameraId, CameraModel, GroundHomography, GroundPoint,
    WorldPoint, WorldPose,
};
use rownav_core::navigator::{MissionPlan, NavigatorConfig};
use rownav_core::perception::{
    draw_heading_noise, synthetic_heatmap, SyntheticOptions, DETECTION_VALIDITY_DEG,
};
use rownav_core::simulator::{
    run_trial, write_trial_log, NoiseSpec, RowSegment, TrialLog, TrialSetup, VineyardLayout,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::Instant;

fn pass(criterion: u32, label: &str) {
    println!("criterion {criterion} ({label}): PASS");
}

/// Criterion 1: over 500 randomized simulated frames, the per-row argmax of
/// the rendered ground-truth heatmap matches the projected path column within
/// 1 px at every covered row; runtime under 30 s.
#[test]
fn criterion_01_annotation_keystone() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);

    // A gently bending path so frames cover curved projections too.
    let pts: Vec<WorldPoint> = (0..=240)
        .map(|i| {
            let x = i as f64 * 0.5;
            WorldPoint::new(x, 1.5 * (0.04 * x).sin(), 0.0)
        })
        .collect();
    let ts: Vec<f64> = (0..=240).map(|i| i as f64 * 0.5).collect();
    let path = PathPolyline::new(pts.clone(), ts).unwrap();
    let camera = CameraModel::default_for(CameraId::Front);

    let mut checked_frames = 0;
    let mut checked_rows = 0usize;
    while checked_frames < 500 {
        let along: f64 = rng.random_range(5.0..100.0);
        let base = &pts[(along * 2.0) as usize];
        let path_dir = (1.5 * 0.04 * (0.04 * along).cos()).atan();
        let pose = WorldPose::planar(
            base.east + rng.random_range(-0.5..0.5),
            base.north + rng.random_range(-0.5..0.5),
            path_dir + rng.random_range(-0.35..0.35),
        );
        let frame = FrameRecord {
            frame_id: checked_frames,
            pose,
            camera: camera.clone(),
            timestamp: 0.0,
            extrapolated: false,
        };
        let Ok(img_path) = project_path(&frame, &path, 20.0) else {
            continue;
        };
        if img_path.len() < 60 {
            continue;
        }
        let hm = render_heatmap(&img_path, camera.heatmap_size(), 15.0);
        for e in img_path.entries() {
            if e.row % 2 != 0 {
                continue;
            }
            let r = (e.row as f64 * HEATMAP_SCALE) as u32;
            if r >= hm.height() {
                continue;
            }
            let (argmax, value) = hm.row_argmax(r);
            assert!(value > 0.5, "frame {checked_frames} row {r}: peak too weak");
            let want = e.col * HEATMAP_SCALE;
            assert!(
                (argmax as f64 - want).abs() <= 1.0,
                "frame {checked_frames} row {r}: argmax {argmax} vs path {want:.2}"
            );
            checked_rows += 1;
        }
        checked_frames += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "keystone took {elapsed:.1} s");
    assert!(checked_rows > 10_000, "only {checked_rows} rows checked");
    pass(1, "annotation keystone");
}

/// Criterion 2: 1000 random visible ground-plane points survive the
/// projection/homography round trip within 1e-6 m.
#[test]
fn criterion_02_projection_homography_roundtrip() {
    let cam = CameraModel::default_for(CameraId::Front);
    let pose = WorldPose::planar(3.0, -7.0, 1.1);
    let h = GroundHomography::new(&cam, &pose).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 1000 {
        let g = GroundPoint::new(rng.random_range(1.0..40.0), rng.random_range(-10.0..10.0));
        let Some(px) = h.ground_to_image(&g) else { continue };
        if !cam.contains(&px) {
            continue;
        }
        let back = h.image_to_ground(&px).unwrap();
        let err = ((back.x_forward - g.x_forward).powi(2) + (back.y_left - g.y_left).powi(2)).sqrt();
        assert!(err < 1e-6, "round-trip error {err} at {g:?}");
        checked += 1;
    }
    pass(2, "projection/homography round trip");
}

/// Criterion 3: heatmap value 15 full-resolution pixels perpendicular to the
/// path equals exp(-1/2) within 1e-9.
#[test]
fn criterion_03_gaussian_value() {
    use rownav_core::perception::{ImagePath, PathEntry};
    let entries: Vec<PathEntry> =
        (0..480).map(|r| PathEntry { row: r, col: 369.0, confidence: 1.0 }).collect();
    let path = ImagePath::new(entries, CameraId::Front);
    let hm = render_heatmap(&path, (320, 240), 15.0);
    // Half-res column 192 is 7.5 half-res px (= 15 full-res px) from the
    // path at 184.5.
    let got = hm.get(120, 192);
    let want = (-0.5f64).exp();
    assert!((got - want).abs() < 1e-9, "value {got} vs exp(-1/2) {want}");
    pass(3, "Gaussian kernel value");
}

fn single_row_setup(offset_left: f64) -> TrialSetup {
    let layout = VineyardLayout::crt();
    let plan = MissionPlan::serpentine(&layout, Some(vec![0])).unwrap();
    let row = plan.rows[0];
    let dir = row.direction();
    let (s, c) = dir.sin_cos();
    let start = WorldPoint::new(
        row.start.east - s * offset_left,
        row.start.north + c * offset_left,
        row.start.up,
    );
    let mut setup = TrialSetup::new(layout, plan, 7);
    setup.noise = NoiseSpec::zero();
    setup.start_pose = Some(WorldPose::new(start, dir, 0.0, 0.0));
    setup
}

/// Criterion 4: with zero noise, the closed loop from a 0.4 m lateral offset
/// reaches |e_y| < 0.05 m within 8 m of travel, never overshoots past 0.1 m,
/// holds the band for the rest of the row, and keeps the mean heading
/// deviation under 1°.
#[test]
fn criterion_04_controller_convergence() {
    let setup = single_row_setup(0.4);
    let log = run_trial(&setup);
    assert!(log.completed, "single-row run did not complete");

    let plan = MissionPlan::serpentine(&VineyardLayout::crt(), Some(vec![0])).unwrap();
    let mut travel = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut initial_sign: Option<f64> = None;
    let mut converged_at: Option<f64> = None;
    for (row, cmd) in log.rows.iter().zip(&log.commands) {
        if let Some((pe, pn)) = prev {
            travel += ((row.east - pe).powi(2) + (row.north - pn).powi(2)).sqrt();
        }
        prev = Some((row.east, row.north));
        let Some(e_y) = cmd.e_y else { continue };
        let s0 = *initial_sign.get_or_insert(e_y.signum());
        match converged_at {
            None => {
                // Never more than 0.1 m past the line on the far side.
                assert!(
                    s0 * e_y > -0.1 - 1e-9,
                    "overshoot to {e_y:.3} m at travel {travel:.2} m"
                );
                if e_y.abs() < 0.05 {
                    converged_at = Some(travel);
                }
            }
            Some(_) => {
                assert!(
                    e_y.abs() < 0.05,
                    "left the band after convergence: e_y {e_y:.3} at travel {travel:.2} m"
                );
            }
        }
    }
    let converged_at = converged_at.expect("never converged");
    assert!(converged_at <= 8.0, "converged only after {converged_at:.2} m");

    let summary = summarize(&log.rtk, &plan, 0, 10);
    let heading = summary.heading_for(Region::RowTracking).expect("heading stats");
    assert!(heading.mean_abs < 1.0, "mean heading deviation {:.3}°", heading.mean_abs);
    pass(4, "controller convergence");
}

/// Criterion 5: the synthetic provider is invalid exactly beyond ±25° of the
/// row direction, and its per-bin angular noise matches the calibration
/// table within 10% over 10^4 seeded draws.
#[test]
fn criterion_05_detection_validity_and_noise() {
    let layout = VineyardLayout::crt();
    let corridor = layout.corridor(0);
    let cam = CameraModel::default_for(CameraId::Front);
    let noise = NoiseSpec::zero();
    let opts = SyntheticOptions::default();
    for tenth_deg in (-400..=400).step_by(5) {
        let err = tenth_deg as f64 / 10.0;
        let pose = WorldPose::planar(
            60.0,
            corridor.start.north,
            corridor.direction() + err.to_radians(),
        );
        let got =
            synthetic_heatmap(&layout, &pose, &cam, CameraId::Front, &noise, 5, &opts).is_ok();
        let want = err.abs() <= DETECTION_VALIDITY_DEG;
        assert_eq!(got, want, "validity mismatch at heading error {err}°");
    }

    let noise = NoiseSpec::default();
    let bins = [
        (-20.0, 2.36),
        (-10.0, 2.22),
        (0.0, 1.10),
        (10.0, 1.57),
        (20.0, 8.05),
    ];
    for (i, (center, want_std)) in bins.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i as u64);
        let n = 10_000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let d = draw_heading_noise(&noise, center, &mut rng);
            sum_sq += d * d;
        }
        let std = (sum_sq / n as f64).sqrt();
        assert!(
            (std - want_std).abs() / want_std < 0.10,
            "bin {center}°: sample std {std:.3} vs calibrated {want_std}"
        );
    }
    pass(5, "detection validity window and noise calibration");
}

struct MissionRun {
    seed: u64,
    log: TrialLog,
    wall_s: f64,
}

fn crt_mission_runs() -> &'static Vec<MissionRun> {
    static RUNS: OnceLock<Vec<MissionRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let layout = VineyardLayout::crt();
        let plan = MissionPlan::serpentine(&layout, None).unwrap();
        (1..=20u64)
            .map(|seed| {
                let setup = TrialSetup::new(layout.clone(), plan.clone(), seed);
                let t0 = Instant::now();
                let log = run_trial(&setup);
                MissionRun { seed, log, wall_s: t0.elapsed().as_secs_f64() }
            })
            .collect()
    })
}

fn row_tracking_stats(log: &TrialLog, plan: &MissionPlan) -> RegionStats {
    let summary = summarize(&log.rtk, plan, log.interventions, 10);
    *summary.positional_for(Region::RowTracking).expect("row-tracking stats")
}

/// Criterion 6: the four-row serpentine mission under calibrated noise,
/// swept over 20 seeds: at least 18 zero-intervention completions, per-run
/// row-tracking mean ≤ 0.30 m and |max| ≤ 0.60 m, each run within 60 s.
#[test]
fn criterion_06_full_mission_envelope() {
    let plan = MissionPlan::serpentine(&VineyardLayout::crt(), None).unwrap();
    let runs = crt_mission_runs();
    let clean = runs
        .iter()
        .filter(|r| r.log.completed && r.log.interventions == 0)
        .count();
    assert!(clean >= 18, "only {clean}/20 zero-intervention runs");
    for run in runs {
        assert!(run.wall_s < 60.0, "seed {}: {:.1} s wall time", run.seed, run.wall_s);
        assert!(run.log.completed, "seed {}: did not complete", run.seed);
        assert_eq!(run.log.rows_completed, 4, "seed {}", run.seed);
        let stats = row_tracking_stats(&run.log, &plan);
        assert!(
            stats.mean_abs <= 0.30,
            "seed {}: row-tracking mean {:.3} m",
            run.seed,
            stats.mean_abs
        );
        assert!(
            stats.signed_max.abs() <= 0.60,
            "seed {}: row-tracking max {:.3} m",
            run.seed,
            stats.signed_max
        );
    }
    pass(6, "full-mission trial envelope");
}

/// Criterion 7: the 90 m and 70 m presets complete with unchanged gains and
/// thresholds, staying within 1.5x of the mission envelope.
#[test]
fn criterion_07_generalization() {
    for layout in [VineyardLayout::vg3(), VineyardLayout::rn()] {
        let name = layout.name.clone();
        let plan = MissionPlan::serpentine(&layout, None).unwrap();
        let setup = TrialSetup::new(layout, plan.clone(), 1);
        assert_eq!(setup.gains, ControllerGains::default(), "gains must be unchanged");
        assert_eq!(setup.nav, NavigatorConfig::default(), "thresholds must be unchanged");
        let log = run_trial(&setup);
        assert!(log.completed, "{name}: did not complete");
        assert_eq!(log.interventions, 0, "{name}: needed interventions");
        let stats = row_tracking_stats(&log, &plan);
        assert!(stats.mean_abs <= 0.45, "{name}: mean {:.3} m", stats.mean_abs);
        assert!(stats.signed_max.abs() <= 0.90, "{name}: max {:.3} m", stats.signed_max);
    }
    pass(7, "generalization to unseen layouts");
}

/// Criterion 8: positional deviation agrees with an independent brute-force
/// point-to-segment oracle to 1e-12 over 1000 random cases; the region rule
/// classifies exactly the 12 m end circles; the summary renders in the
/// "mean ± std, max" cell format.
#[test]
fn criterion_08_metrics_oracle() {
    use rownav_core::evaluation::{assign_region, positional_deviation};

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut checked = 0;
    while checked < 1000 {
        let row = RowSegment::new(
            WorldPoint::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), 0.0),
            WorldPoint::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), 0.0),
        );
        if row.length() < 1.0 {
            continue;
        }
        let p = WorldPoint::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), 0.0);
        let got = positional_deviation(&p, &row);

        // Ternary search of the convex point-to-segment distance.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let d_at = |t: f64| {
            let e = row.start.east + t * (row.end.east - row.start.east);
            let n = row.start.north + t * (row.end.north - row.start.north);
            ((p.east - e).powi(2) + (p.north - n).powi(2)).sqrt()
        };
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if d_at(m1) < d_at(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let dir = row.direction();
        let cross = dir.cos() * (p.north - row.start.north) - dir.sin() * (p.east - row.start.east);
        let want = if cross >= 0.0 { d_at(0.5 * (lo + hi)) } else { -d_at(0.5 * (lo + hi)) };
        assert!((got - want).abs() < 1e-12, "oracle mismatch: {got} vs {want}");
        checked += 1;
    }

    let layout = VineyardLayout::crt();
    let plan = MissionPlan::serpentine(&layout, None).unwrap();
    let row = plan.rows[0].segment();
    let mut x = 0.25;
    while x < row.length() {
        let p = row.point_at(x);
        let region = assign_region(&p, (1.0, 0.0), &plan);
        let at_ends = x < END_REGION_RADIUS || x > row.length() - END_REGION_RADIUS;
        assert_eq!(
            region != Region::RowTracking,
            at_ends,
            "x={x}: region {region:?}"
        );
        x += 0.25;
    }

    let stats = RegionStats { mean_abs: 0.19, std_abs: 0.13, signed_max: -0.52, count: 10 };
    assert_eq!(stats.cell(), "0.19 ± 0.13, -0.52");
    pass(8, "metrics oracle and table format");
}

/// Criterion 9: identical config and seed produce byte-identical logs.
#[test]
fn criterion_09_determinism() {
    let layout = VineyardLayout::rn();
    let plan = MissionPlan::serpentine(&layout, Some(vec![0, 1])).unwrap();
    let setup = TrialSetup::new(layout, plan.clone(), 42);

    let tmp = std::env::temp_dir().join(format!("rownav_acc_det_{}", std::process::id()));
    let dirs = [tmp.join("a"), tmp.join("b")];
    for dir in &dirs {
        let log = run_trial(&setup);
        write_trial_log(dir, &log, &plan).unwrap();
    }
    for file in ["trial.csv", "commands.csv", "rtk.csv", "coarse.csv", "events.jsonl", "meta.json"]
    {
        let a = std::fs::read(dirs[0].join(file)).unwrap();
        let b = std::fs::read(dirs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    std::fs::remove_dir_all(&tmp).ok();
    pass(9, "determinism");
}

/// Criterion 10: in the criterion-6 runs, every outward-turn exit has the
/// side camera within 2° of the completed row, and every inward-turn exit
/// has the robot heading within 5° of the new row direction.
#[test]
fn criterion_10_row_switch_geometry() {
    let layout = VineyardLayout::crt();
    let plan = MissionPlan::serpentine(&layout, None).unwrap();
    let runs = crt_mission_runs();
    let mut outward = 0;
    let mut inward = 0;
    for run in runs {
        let heading_at = |t: f64| -> f64 {
            let row = run
                .log
                .rows
                .iter()
                .min_by(|a, b| {
                    (a.time - t).abs().partial_cmp(&(b.time - t).abs()).unwrap()
                })
                .unwrap();
            row.heading
        };
        let mut switch = 0usize;
        for ev in &run.log.events {
            if !matches!(ev.kind, rownav_core::navigator::EventKind::PhaseChange) {
                continue;
            }
            if ev.detail == "2 -> 3" {
                let h = heading_at(ev.time);
                let side = plan.turn_direction(switch).unwrap().side_camera();
                let completed = plan.rows[switch].direction();
                let err = fold_half_circle(h + side.mount_yaw() - completed)
                    .abs()
                    .to_degrees();
                assert!(
                    err <= 2.0,
                    "seed {} switch {switch}: side-camera alignment {err:.2}°",
                    run.seed
                );
                outward += 1;
            } else if ev.detail == "4 -> 0" {
                let h = heading_at(ev.time);
                let next = plan.rows[switch + 1].direction();
                let err = wrap_angle(h - next).abs().to_degrees();
                assert!(
                    err <= 5.0,
                    "seed {} switch {switch}: entry heading error {err:.2}°",
                    run.seed
                );
                inward += 1;
                switch += 1;
            }
        }
    }
    assert_eq!(outward, 60, "expected 3 outward turns in each of 20 runs");
    assert_eq!(inward, 60);
    pass(10, "row-switch geometry");
}
