mod common;

use common::{model, rest_state, square_anchors};
use reachbot::control::torques_from_contact_forces;
use reachbot::dynamics::{contact_forces_from_torques, step, JointCommand, RobotState, Stage};
use reachbot::frames::{perp, unit, PlanarPose, Twist};
use reachbot::kinematics::{grasp_maps, BoomJointState};
use reachbot::{Stacked, Vec2};

fn integrate(mut s: RobotState, cmd: &JointCommand, gravity: Vec2, dt: f64, t: f64) -> RobotState {
    let model = model(gravity);
    let anchors = square_anchors(2.0);
    let n = (t / dt).round() as usize;
    for _ in 0..n {
        s = step(&s, cmd, &model, &anchors, dt).unwrap();
    }
    s
}

fn pose_distance(a: &RobotState, b: &RobotState) -> f64 {
    (a.body.position() - b.body.position())
        .norm()
        .max((a.body.angle() - b.body.angle()).abs())
}

#[test]
fn rk4_self_convergence_is_fourth_order() {
    let m = model(Vec2::new(0.0, -1.625));
    let anchors = square_anchors(2.0);
    let mut s0 = rest_state(PlanarPose::new(Vec2::new(0.1, -0.05), 0.1), &m, &anchors);
    s0.vel = Twist::new(Vec2::new(0.2, -0.1), 0.3);
    let cmd = JointCommand {
        f_b: [0.3, -0.2, 0.1, 0.4],
        tau_theta: [0.05, -0.1, 0.2, -0.03],
    };
    let coarse = integrate(s0, &cmd, m.body.gravity, 0.1, 1.0);
    let mid = integrate(s0, &cmd, m.body.gravity, 0.05, 1.0);
    let fine = integrate(s0, &cmd, m.body.gravity, 0.025, 1.0);
    let order = (pose_distance(&coarse, &mid) / pose_distance(&mid, &fine)).log2();
    // The estimate is about 4.02 here; allow for its own truncation error.
    assert!(order >= 3.9, "observed order {order}");
}

#[test]
fn free_end_effector_moves_in_a_straight_line() {
    let m = model(Vec2::zeros());
    let anchors = square_anchors(2.0).with_attachments([None, Some(1), Some(2), Some(3)]).unwrap();
    let mut s = rest_state(PlanarPose::identity(), &m, &anchors);
    s.stage = Stage::EndEffectorMove(0);
    s.joints[0] = BoomJointState {
        b: 1.0,
        theta: 0.3,
        b_dot: 0.2,
        theta_dot: 0.25,
    };
    let q0 = s.joints[0];
    let u0 = unit(q0.theta);
    let r0 = q0.b * u0;
    let v0 = q0.b_dot * u0 + q0.b * q0.theta_dot * perp(&u0);
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    for k in 1..=2000 {
        s = step(&s, &JointCommand::zero(), &m, &anchors, dt).unwrap();
        let q = s.joints[0];
        let r = q.b * unit(q.theta);
        worst = worst.max((r - (r0 + v0 * (k as f64 * dt))).norm());
    }
    assert!(worst < 1e-8, "max deviation {worst:e}");
    assert_eq!(s.body, PlanarPose::identity());
}

#[test]
fn unloaded_body_falls_ballistically() {
    let g = Vec2::new(0.0, -1.625);
    let m = model(g);
    let anchors = square_anchors(2.0);
    let mut s0 = rest_state(PlanarPose::new(Vec2::zeros(), 0.2), &m, &anchors);
    s0.vel = Twist::new(Vec2::new(0.1, 0.2), 0.1);
    let v0 = s0.world_velocity();
    let t = 1.0;
    let s = integrate(s0, &JointCommand::zero(), g, 1e-3, t);
    let expected = v0 * t + 0.5 * g * t * t;
    assert!((s.body.position() - expected).norm() < 1e-9);
    assert!((s.body.angle() - (0.2 + 0.1 * t)).abs() < 1e-12);
    assert!((s.world_velocity() - (v0 + g * t)).norm() < 1e-9);
}

#[test]
fn unloaded_body_conserves_kinetic_energy() {
    let m = model(Vec2::zeros());
    let anchors = square_anchors(2.0);
    let mut s0 = rest_state(PlanarPose::identity(), &m, &anchors);
    s0.vel = Twist::new(Vec2::new(0.1, -0.2), 0.4);
    let e0 = s0.kinetic_energy(&m.body);
    let s = integrate(s0, &JointCommand::zero(), Vec2::zeros(), 1e-2, 1.0);
    assert!((s.kinetic_energy(&m.body) - e0).abs() < 1e-12 * e0.max(1.0));
}

#[test]
fn torques_and_contact_forces_are_inverse_maps() {
    let m = model(Vec2::zeros());
    let anchors = square_anchors(2.0);
    let s = rest_state(PlanarPose::new(Vec2::new(0.2, 0.1), -0.3), &m, &anchors);
    let maps = grasp_maps(&s.body, &s.joints, &m.booms, &anchors).unwrap();
    let x = Stacked::from([1.0, -2.0, 3.0, 0.5, -4.0, 2.5, 0.0, 1.0]);
    let back = contact_forces_from_torques(&maps, &torques_from_contact_forces(&maps, &x)).unwrap();
    assert!((back - x).amax() < 1e-12);
}
