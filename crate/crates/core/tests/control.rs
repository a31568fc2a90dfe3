mod common;

use common::{model, rest_state, square_anchors};
use nalgebra::Vector3;
use proptest::prelude::*;
use reachbot::control::{
    body_computed_torque, body_errors, distribute_wrench, parameterization_u,
    parameterization_u_dot, BodyGains, BodyTarget,
};
use reachbot::dynamics::body_forward_dynamics;
use reachbot::frames::{PlanarPose, Twist, Wrench};
use reachbot::kinematics::grasp_maps;
use reachbot::Vec2;

fn pose_strategy() -> impl Strategy<Value = PlanarPose> {
    (-0.5..0.5f64, -0.5..0.5f64, -0.6..0.6f64)
        .prop_map(|(x, y, a)| PlanarPose::new(Vec2::new(x, y), a))
}

fn wrench_strategy() -> impl Strategy<Value = Wrench> {
    (-100.0..100.0f64, -100.0..100.0f64, -20.0..20.0f64)
        .prop_map(|(x, y, t)| Wrench::new(Vec2::new(x, y), t))
}

proptest! {
    #[test]
    fn distributed_loads_reproduce_the_wrench(
        pose in pose_strategy(),
        w in wrench_strategy(),
        pretension in 0.0..200.0f64,
    ) {
        let m = model(Vec2::zeros());
        let anchors = square_anchors(2.0);
        let s = rest_state(pose, &m, &anchors);
        let maps = grasp_maps(&s.body, &s.joints, &m.booms, &anchors).unwrap();
        let x0 = distribute_wrench(&maps, &w, 0.0).unwrap();
        let xp = distribute_wrench(&maps, &w, pretension).unwrap();
        prop_assert!((maps.h * x0 - w.to_vector()).amax() < 1e-9);
        prop_assert!((maps.h * xp - w.to_vector()).amax() < 1e-9);
        // The pretension term adds nothing to the resultant.
        prop_assert!((maps.h * (xp - x0)).amax() < 1e-10);
    }

    #[test]
    fn computed_torque_yields_the_reference_acceleration(
        pose in pose_strategy(),
        vx in -0.3..0.3f64,
        vy in -0.3..0.3f64,
        w in -0.3..0.3f64,
        pretension in 0.0..100.0f64,
    ) {
        let m = model(Vec2::new(0.0, -1.625));
        let anchors = square_anchors(2.0);
        let mut s = rest_state(pose, &m, &anchors);
        s.vel = Twist::new(Vec2::new(vx, vy), w);
        let maps = grasp_maps(&s.body, &s.joints, &m.booms, &anchors).unwrap();
        let gains = BodyGains::diagonal([2.0, 3.0, 4.0], [1.0, 2.0, 3.0]).unwrap();
        let target = BodyTarget::at_rest(Vec2::new(0.1, 0.2), 0.05);
        let cmd = body_computed_torque(&s, &maps, &target, &gains, &m.body, pretension).unwrap();
        let acc = body_forward_dynamics(&s, &maps, &cmd, &m.body).unwrap();

        // Expected body acceleration from the reference pose acceleration.
        let (e, edot) = body_errors(&s, &target);
        let qdd_ref = -gains.kd() * edot - gains.kp() * e;
        let pdot = s.world_velocity();
        let qdot = Vector3::new(pdot.x, pdot.y, s.vel.w);
        let expected = parameterization_u(&s.body) * qdd_ref
            + parameterization_u_dot(&s.body, &s.vel) * qdot;
        prop_assert!((acc.to_vector() - expected).amax() < 1e-9);
    }
}

#[test]
fn pretension_on_a_symmetric_stance_is_exact() {
    let m = model(Vec2::zeros());
    let anchors = square_anchors(2.0);
    let s = rest_state(PlanarPose::identity(), &m, &anchors);
    let maps = grasp_maps(&s.body, &s.joints, &m.booms, &anchors).unwrap();
    let x = distribute_wrench(&maps, &Wrench::zero(), 100.0).unwrap();
    for t in maps.tensions(&x) {
        assert!((t - 100.0).abs() < 1e-9, "tension {t}");
    }
}
