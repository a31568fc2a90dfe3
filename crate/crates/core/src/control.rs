//! Stage controllers.
//!
//! Body moves use feedback linearization. With pose coordinates
//! `q = (p, φ)` in the wall frame and body twist `V = U(q) q̇`, the controller
//! requests the body wrench
//!
//! ```text
//! w = diag(M, M, I) (U q̈_ref + U̇ q̇) + [ω × M v; 0] − [M Rᵀ g; 0]
//! q̈_ref = q̈_d − K_D (q̇ − q̇_d) − K_P (q − q_d)
//! ```
//!
//! distributes it over the anchors with the minimum-norm right inverse of `H`
//! (plus an optional internal pretension), and maps the anchor loads to joint
//! efforts with `Jᵀ`. Under an exact model the pose error then obeys
//! `ë + K_D ė + K_P e = 0`.
//!
//! End-effector moves use a joint-space PD law on `(b, θ)`.

use nalgebra::{Matrix3, SMatrix, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{BodyParams, JointCommand, RobotState};
use crate::frames::{angle_diff, perp, rotation, PlanarPose, Twist, Wrench};
use crate::kinematics::{BoomJointState, GraspMaps};
use crate::{Error, Result, Stacked, Vec2, NUM_BOOMS};

/// Proportional and derivative gain matrices, both symmetric positive
/// definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains<const N: usize> {
    kp: SMatrix<f64, N, N>,
    kd: SMatrix<f64, N, N>,
}

pub type BodyGains = Gains<3>;
pub type EndEffectorGains = Gains<2>;

fn check_spd<const N: usize>(m: &SMatrix<f64, N, N>, which: &'static str) -> Result<()> {
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if !m.iter().all(|c| c.is_finite()) || asym > 1e-12 * scale {
        return Err(Error::GainNotPD {
            which,
            min_eigenvalue: f64::NAN,
        });
    }
    let dynamic = nalgebra::DMatrix::from_column_slice(N, N, m.as_slice());
    let min_eigenvalue = SymmetricEigen::new(dynamic).eigenvalues.min();
    if min_eigenvalue <= 0.0 {
        return Err(Error::GainNotPD {
            which,
            min_eigenvalue,
        });
    }
    Ok(())
}

impl<const N: usize> Gains<N> {
    pub fn new(kp: SMatrix<f64, N, N>, kd: SMatrix<f64, N, N>) -> Result<Self> {
        check_spd(&kp, "proportional")?;
        check_spd(&kd, "derivative")?;
        Ok(Self { kp, kd })
    }

    pub fn diagonal(kp: [f64; N], kd: [f64; N]) -> Result<Self> {
        Self::new(
            SMatrix::from_diagonal(&kp.into()),
            SMatrix::from_diagonal(&kd.into()),
        )
    }

    pub fn kp(&self) -> &SMatrix<f64, N, N> {
        &self.kp
    }

    pub fn kd(&self) -> &SMatrix<f64, N, N> {
        &self.kd
    }
}

/// Symmetric actuator saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLimits {
    /// Prismatic force limit (N).
    pub f_b_max: f64,
    /// Revolute torque limit (N·m).
    pub tau_theta_max: f64,
}

impl ActuatorLimits {
    pub fn unlimited() -> Self {
        Self {
            f_b_max: f64::INFINITY,
            tau_theta_max: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.f_b_max > 0.0 && self.tau_theta_max > 0.0) {
            return Err("actuator limits must be positive".into());
        }
        Ok(())
    }
}

/// Desired body pose in the wall frame with its first and second time
/// derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyTarget {
    pub p_d: Vec2,
    pub phi_d: f64,
    pub p_d_dot: Vec2,
    pub phi_d_dot: f64,
    pub p_d_ddot: Vec2,
    pub phi_d_ddot: f64,
}

impl BodyTarget {
    /// A fixed set-point.
    pub fn at_rest(p_d: Vec2, phi_d: f64) -> Self {
        Self {
            p_d,
            phi_d,
            ..Default::default()
        }
    }
}

/// Joint-space target for a moving boom.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointTarget {
    pub b: f64,
    pub theta: f64,
    pub b_dot: f64,
    pub theta_dot: f64,
}

/// `U(q)`: maps wall-frame pose rates `(ṗ, φ̇)` to the body twist `(v, ω)`.
/// The planar parameterization is `diag(R(φ)ᵀ, 1)`, nonsingular everywhere.
pub fn parameterization_u(pose: &PlanarPose) -> Matrix3<f64> {
    let rt = rotation(pose.angle()).transpose();
    Matrix3::new(
        rt[(0, 0)],
        rt[(0, 1)],
        0.0,
        rt[(1, 0)],
        rt[(1, 1)],
        0.0,
        0.0,
        0.0,
        1.0,
    )
}

/// Time derivative of [`parameterization_u`] along a motion with body twist
/// `twist` (only its angular rate matters).
pub fn parameterization_u_dot(pose: &PlanarPose, twist: &Twist) -> Matrix3<f64> {
    let (s, c) = pose.angle().sin_cos();
    let w = twist.w;
    Matrix3::new(-s * w, c * w, 0.0, -c * w, -s * w, 0.0, 0.0, 0.0, 0.0)
}

/// Splits a desired body wrench into anchor loads.
///
/// Returns `x = H⁺ w + x_p`, where `H⁺` is the Moore–Penrose (minimum-norm
/// right) inverse and `x_p` lies in the nullspace of `H`. `x_p` is the
/// least-squares choice that brings every attached boom's axial tension as
/// close as possible to `pretension`; it is linear in `pretension` and
/// vanishes when `pretension` is zero, so `H x = w` regardless.
pub fn distribute_wrench(maps: &GraspMaps, w: &Wrench, pretension: f64) -> Result<Stacked> {
    maps.ensure_full_rank()?;
    let pinv = pseudo_inverse(&maps.h)?;
    let mut x = pinv * w.to_vector();
    if pretension != 0.0 {
        let null = SMatrix::<f64, 8, 8>::identity() - pinv * maps.h;
        let a = maps.tension_map();
        let an = a * null;
        let target = nalgebra::Vector4::from_fn(|i, _| {
            if maps.attached[i] {
                pretension
            } else {
                0.0
            }
        });
        let z = an
            .svd(true, true)
            .solve(&target, 1e-12 * an.amax().max(1.0))
            .map_err(|_| Error::RankDeficient { rank: 0 })?;
        x += null * z;
    }
    Ok(x)
}

fn pseudo_inverse(h: &SMatrix<f64, 3, 8>) -> Result<SMatrix<f64, 8, 3>> {
    let svd = h.svd(true, true);
    let max = svd.singular_values.max();
    svd.pseudo_inverse(crate::kinematics::RANK_TOLERANCE * max)
        .map_err(|_| Error::RankDeficient { rank: 0 })
}

/// Pose error `(p − p_d, wrap(φ − φ_d))` and its rate.
pub fn body_errors(state: &RobotState, target: &BodyTarget) -> (Vector3<f64>, Vector3<f64>) {
    let ep = state.body.position() - target.p_d;
    let e = Vector3::new(ep.x, ep.y, angle_diff(state.body.angle(), target.phi_d));
    let pdot = state.world_velocity();
    let edot = Vector3::new(
        pdot.x - target.p_d_dot.x,
        pdot.y - target.p_d_dot.y,
        state.vel.w - target.phi_d_dot,
    );
    (e, edot)
}

/// Body wrench requested by the computed-torque law (body frame).
pub fn computed_torque_wrench(
    state: &RobotState,
    target: &BodyTarget,
    gains: &BodyGains,
    params: &BodyParams,
) -> Wrench {
    let (e, edot) = body_errors(state, target);
    let qdd_d = Vector3::new(target.p_d_ddot.x, target.p_d_ddot.y, target.phi_d_ddot);
    let qdd_ref = qdd_d - gains.kd() * edot - gains.kp() * e;
    let pdot = state.world_velocity();
    let qdot = Vector3::new(pdot.x, pdot.y, state.vel.w);
    let acc = parameterization_u(&state.body) * qdd_ref
        + parameterization_u_dot(&state.body, &state.vel) * qdot;
    let v = state.vel.v;
    let coriolis = params.mass * state.vel.w * perp(&v);
    let g_body = state.body.rotation().transpose() * params.gravity;
    let f = params.mass * Vec2::new(acc.x, acc.y) + coriolis - params.mass * g_body;
    Wrench::new(f, params.inertia * acc.z)
}

/// Computed-torque joint efforts for a body move, before clipping.
pub fn body_computed_torque(
    state: &RobotState,
    maps: &GraspMaps,
    target: &BodyTarget,
    gains: &BodyGains,
    params: &BodyParams,
    pretension: f64,
) -> Result<JointCommand> {
    let w = computed_torque_wrench(state, target, gains, params);
    let x = distribute_wrench(maps, &w, pretension)?;
    Ok(JointCommand::from_vector(&(maps.j.transpose() * x)))
}

/// Joint efforts holding the given anchor loads: `τ = Jᵀ x`.
pub fn torques_from_contact_forces(maps: &GraspMaps, x: &Stacked) -> JointCommand {
    JointCommand::from_vector(&(maps.j.transpose() * x))
}

/// PD law for a free boom: `K_P (q_d − q) + K_D (q̇_d − q̇)`, with the angle
/// error taken along the shortest arc. Returns `(f_b, τ_θ)` before clipping.
pub fn end_effector_pd(
    q: &BoomJointState,
    target: &JointTarget,
    gains: &EndEffectorGains,
) -> (f64, f64) {
    let err = Vector2::new(target.b - q.b, angle_diff(target.theta, q.theta));
    let derr = Vector2::new(target.b_dot - q.b_dot, target.theta_dot - q.theta_dot);
    let u = gains.kp() * err + gains.kd() * derr;
    (u.x, u.y)
}

/// Saturates every component to its actuator limit.
pub fn clip(cmd: &JointCommand, limits: &ActuatorLimits) -> JointCommand {
    JointCommand {
        f_b: cmd.f_b.map(|f| f.clamp(-limits.f_b_max, limits.f_b_max)),
        tau_theta: cmd
            .tau_theta
            .map(|t| t.clamp(-limits.tau_theta_max, limits.tau_theta_max)),
    }
}

/// True if clipping changes any component.
pub fn is_saturated(cmd: &JointCommand, limits: &ActuatorLimits) -> bool {
    (0..NUM_BOOMS).any(|i| {
        cmd.f_b[i].abs() > limits.f_b_max || cmd.tau_theta[i].abs() > limits.tau_theta_max
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn u_examples() {
        assert_eq!(parameterization_u(&PlanarPose::identity()), Matrix3::identity());
        let u = parameterization_u(&PlanarPose::new(Vec2::zeros(), PI / 2.0));
        let expected = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(u, expected, epsilon = 1e-15);
    }

    #[test]
    fn gains_must_be_positive_definite() {
        assert!(BodyGains::diagonal([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]).is_ok());
        assert!(matches!(
            BodyGains::diagonal([1.0, 0.0, 1.0], [1.0, 1.0, 1.0]),
            Err(Error::GainNotPD { which: "proportional", .. })
        ));
        assert!(matches!(
            EndEffectorGains::diagonal([1.0, 1.0], [1.0, -2.0]),
            Err(Error::GainNotPD { which: "derivative", .. })
        ));
        let asym = SMatrix::<f64, 2, 2>::new(2.0, 1.0, 0.0, 2.0);
        assert!(EndEffectorGains::new(asym, SMatrix::identity()).is_err());
        // indefinite but symmetric with positive diagonal
        let indef = SMatrix::<f64, 2, 2>::new(1.0, 2.0, 2.0, 1.0);
        assert!(EndEffectorGains::new(indef, SMatrix::identity()).is_err());
    }

    #[test]
    fn pd_examples() {
        let gains = EndEffectorGains::diagonal([5.0, 2.5], [4.5, 2.2]).unwrap();
        let q = BoomJointState::new(2.0, 0.4);
        let at = JointTarget { b: 2.0, theta: 0.4, ..Default::default() };
        assert_eq!(end_effector_pd(&q, &at, &gains), (0.0, 0.0));
        let ahead = JointTarget { b: 2.1, theta: 0.4, ..Default::default() };
        let (f, t) = end_effector_pd(&q, &ahead, &gains);
        assert_relative_eq!(f, 0.5, epsilon = 1e-12);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn pd_angle_error_takes_short_arc() {
        let gains = EndEffectorGains::diagonal([1.0, 1.0], [1.0, 1.0]).unwrap();
        let q = BoomJointState::new(1.0, 3.1);
        let target = JointTarget { b: 1.0, theta: -3.1, ..Default::default() };
        let (_, t) = end_effector_pd(&q, &target, &gains);
        assert_relative_eq!(t, 2.0 * PI - 6.2, epsilon = 1e-12);
    }

    #[test]
    fn clip_examples() {
        let limits = ActuatorLimits { f_b_max: 5.0, tau_theta_max: 2.5 };
        let cmd = JointCommand {
            f_b: [7.0, -1.0, 0.0, -9.0],
            tau_theta: [-4.0, 1.0, 2.5, 0.1],
        };
        let c = clip(&cmd, &limits);
        assert_eq!(c.f_b, [5.0, -1.0, 0.0, -5.0]);
        assert_eq!(c.tau_theta, [-2.5, 1.0, 2.5, 0.1]);
        assert!(is_saturated(&cmd, &limits));
        assert!(!is_saturated(&c, &limits));
    }

    proptest! {
        #[test]
        fn clip_is_a_projection(
            f in prop::array::uniform4(-20.0..20.0f64),
            t in prop::array::uniform4(-20.0..20.0f64),
            fmax in 0.1..10.0f64,
            tmax in 0.1..10.0f64,
        ) {
            let limits = ActuatorLimits { f_b_max: fmax, tau_theta_max: tmax };
            let cmd = JointCommand { f_b: f, tau_theta: t };
            let once = clip(&cmd, &limits);
            prop_assert_eq!(clip(&once, &limits), once);
            for (&c, &raw) in once.f_b.iter().zip(&f) {
                prop_assert!(c.abs() <= fmax);
                if raw.abs() <= fmax { prop_assert_eq!(c, raw); }
            }
            prop_assert!(once.tau_theta.iter().all(|c| c.abs() <= tmax));
        }
    }
}
