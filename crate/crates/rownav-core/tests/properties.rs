//! Property tests over the numeric invariants that must hold for arbitrary
//! inputs, not just the handpicked cases.

use proptest::prelude::*;
use rownav_core::control::{compute_command, ControllerGains};
use rownav_core::geometry::{
    fold_half_circle, wrap_angle, CameraId, CameraModel, GroundHomography, GroundPoint, WorldPose,
};

proptest! {
    #[test]
    fn wrapped_angles_stay_in_range(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        // Wrapping preserves the angle modulo a full turn.
        prop_assert!(((a - w) / (2.0 * std::f64::consts::PI)).rem_euclid(1.0) < 1e-6
            || ((a - w) / (2.0 * std::f64::consts::PI)).rem_euclid(1.0) > 1.0 - 1e-6);
    }

    #[test]
    fn folded_angles_identify_opposites(a in -20.0f64..20.0) {
        let f = fold_half_circle(a);
        prop_assert!((-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2).contains(&f));
        let g = fold_half_circle(a + std::f64::consts::PI);
        prop_assert!((f - g).abs() < 1e-9);
    }

    #[test]
    fn homography_roundtrip_for_arbitrary_poses(
        east in -100.0f64..100.0,
        north in -100.0f64..100.0,
        heading in -3.1f64..3.1,
        forward in 2.0f64..25.0,
        left in -6.0f64..6.0,
    ) {
        let cam = CameraModel::default_for(CameraId::Front);
        let pose = WorldPose::planar(east, north, heading);
        let h = GroundHomography::new(&cam, &pose).unwrap();
        let g = GroundPoint::new(forward, left);
        if let Some(px) = h.ground_to_image(&g) {
            prop_assume!(cam.contains(&px));
            let back = h.image_to_ground(&px).unwrap();
            prop_assert!((back.x_forward - g.x_forward).abs() < 1e-6);
            prop_assert!((back.y_left - g.y_left).abs() < 1e-6);
        }
    }

    #[test]
    fn commands_stay_within_limits_and_negate_cleanly(
        e_y in -50.0f64..50.0,
        e_theta in -1.4f64..1.4,
        prev_y in -50.0f64..50.0,
        prev_t in -1.4f64..1.4,
        dt in 0.001f64..0.2,
    ) {
        let gains = ControllerGains::default();
        let cmd = compute_command(e_y, e_theta, Some((prev_y, prev_t)), dt, &gains);
        prop_assert!(cmd.v.abs() <= gains.v_max + 1e-12);
        prop_assert!(cmd.omega.abs() <= gains.omega_max + 1e-12);
        let neg = compute_command(-e_y, -e_theta, Some((-prev_y, -prev_t)), dt, &gains);
        prop_assert!((cmd.omega + neg.omega).abs() < 1e-12);
        prop_assert!((cmd.v - neg.v).abs() < 1e-12);
    }
}
