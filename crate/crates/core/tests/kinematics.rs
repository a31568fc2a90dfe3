mod common;

use common::{model, square_anchors};
use nalgebra::{Matrix2, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachbot::control::{parameterization_u, parameterization_u_dot};
use reachbot::frames::{PlanarPose, Twist};
use reachbot::kinematics::{
    boom_inverse_kinematics, boom_jacobian, grasp_maps, inverse_kinematics,
    joint_rates_from_body_twist, BoomConfig, BoomJointState,
};
use reachbot::{Stacked, Vec2, NUM_BOOMS};

const H: f64 = 1e-6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn pose_strategy() -> impl Strategy<Value = PlanarPose> {
    (-0.5..0.5f64, -0.5..0.5f64, -0.6..0.6f64).prop_map(|(x, y, a)| PlanarPose::new(Vec2::new(x, y), a))
}

fn twist_strategy() -> impl Strategy<Value = Twist> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, w)| Twist::new(Vec2::new(x, y), w))
}

/// Pose after time `t` at constant body twist. Only first-order accurate, but
/// the error is even in `t` and cancels in central differences.
fn advance(pose: &PlanarPose, twist: &Twist, t: f64) -> PlanarPose {
    let delta = PlanarPose::new(twist.v * t, twist.w * t);
    pose.compose(&delta)
}

proptest! {
    #[test]
    fn boom_jacobian_matches_finite_differences(
        pose in pose_strategy(),
        b in 0.2..4.0f64,
        theta in -3.0..3.0f64,
    ) {
        let cfg = BoomConfig { shoulder_offset: Vec2::new(0.15, 0.1), b_min: 0.0, b_max: 10.0, ee_mass: 1.0 };
        let tip = |b: f64, theta: f64| BoomJointState::new(b, theta).tip_position(&pose, &cfg);
        let db = (tip(b + H, theta) - tip(b - H, theta)) / (2.0 * H);
        let dt = (tip(b, theta + H) - tip(b, theta - H)) / (2.0 * H);
        let fd = Matrix2::from_columns(&[db, dt]);
        let j = boom_jacobian(&BoomJointState::new(b, theta), &pose);
        for (a, e) in j.iter().zip(fd.iter()) {
            prop_assert!(rel_err(*a, *e) < 1e-6, "{} vs {}", a, e);
        }
    }

    #[test]
    fn u_maps_pose_rates_to_twist_and_u_dot_matches(pose in pose_strategy(), twist in twist_strategy()) {
        // Pose rates from the twist, then back through U.
        let qdot = Vector3::new(
            (pose.rotation() * twist.v).x,
            (pose.rotation() * twist.v).y,
            twist.w,
        );
        let back = parameterization_u(&pose) * qdot;
        prop_assert!((back - twist.to_vector()).amax() < 1e-12);

        let fd = (parameterization_u(&advance(&pose, &twist, H))
            - parameterization_u(&advance(&pose, &twist, -H)))
            / (2.0 * H);
        let u_dot = parameterization_u_dot(&pose, &twist);
        for (a, e) in u_dot.iter().zip(fd.iter()) {
            prop_assert!(rel_err(*a, *e) < 1e-6, "{} vs {}", a, e);
        }
    }

    #[test]
    fn joint_rates_match_finite_differences(pose in pose_strategy(), twist in twist_strategy()) {
        let model = model(Vec2::zeros());
        let anchors = square_anchors(2.0);
        let joints = |p: &PlanarPose| inverse_kinematics(p, &model.booms, &anchors).unwrap().map(|q| q.unwrap());
        let q0 = joints(&pose);
        let maps = grasp_maps(&pose, &q0, &model.booms, &anchors).unwrap();
        let rates = joint_rates_from_body_twist(&maps, &twist).unwrap();
        let plus = joints(&advance(&pose, &twist, H));
        let minus = joints(&advance(&pose, &twist, -H));
        for i in 0..NUM_BOOMS {
            let b_dot = (plus[i].b - minus[i].b) / (2.0 * H);
            let theta_dot = (plus[i].theta - minus[i].theta) / (2.0 * H);
            prop_assert!(rel_err(rates[2 * i], b_dot) < 1e-6);
            prop_assert!(rel_err(rates[2 * i + 1], theta_dot) < 1e-6);
        }
    }

    #[test]
    fn virtual_power_balances(
        pose in pose_strategy(),
        twist in twist_strategy(),
        loads in proptest::array::uniform8(-50.0..50.0f64),
    ) {
        let model = model(Vec2::zeros());
        let anchors = square_anchors(2.0);
        let q = inverse_kinematics(&pose, &model.booms, &anchors).unwrap().map(|q| q.unwrap());
        let maps = grasp_maps(&pose, &q, &model.booms, &anchors).unwrap();
        let x = Stacked::from(loads);
        let qdot = joint_rates_from_body_twist(&maps, &twist).unwrap();
        let body_power = (maps.h * x).dot(&twist.to_vector());
        let joint_power = (maps.j.transpose() * x).dot(&qdot);
        prop_assert!((body_power - joint_power).abs() < 1e-8, "{} vs {}", body_power, joint_power);
    }
}

#[test]
fn inverse_kinematics_round_trip_over_random_layouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let pose = PlanarPose::new(
            Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            rng.random_range(-3.1..3.1),
        );
        let cfg = BoomConfig {
            shoulder_offset: Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)),
            b_min: 0.0,
            b_max: 100.0,
            ee_mass: 1.0,
        };
        let target = pose.position()
            + Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let Ok(q) = boom_inverse_kinematics(0, &pose, &cfg, &target) else {
            continue;
        };
        worst = worst.max((q.tip_position(&pose, &cfg) - target).norm());
    }
    assert!(worst < 1e-12, "worst round-trip error {worst:e}");
}
