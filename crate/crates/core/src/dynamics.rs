//! Equations of motion for both gait stages and the fixed-step integrator.
//!
//! Body move: the booms are massless, so the joints are slaved to the body
//! pose and the joint efforts only matter through the anchor loads they
//! produce, `x = J⁻ᵀ τ`. The body obeys the planar Newton–Euler equations in
//! its own frame,
//!
//! ```text
//! M v̇ + ω × (M v) = f_r + M Rᵀ g
//!        I ω̇      = τ_r
//! ```
//!
//! with `[f_r; τ_r] = H x`.
//!
//! End-effector move: the body is held still and the free boom carries a point
//! mass `m` at its tip. In polar coordinates
//!
//! ```text
//! b̈ = f_b / m + b θ̇²
//! θ̈ = τ_θ / (m b²) − 2 ḃ θ̇ / b
//! ```
//!
//! The torque enters through the tip's moment of inertia `m b²`; dividing by
//! `m b` instead would not be dimensionally consistent.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::frames::{perp, PlanarPose, Twist, Wrench};
use crate::kinematics::{
    grasp_maps, inverse_kinematics, slaved_joints, AnchorSet, BoomConfig, BoomJointState,
    GraspMaps,
};
use crate::{Error, Result, Stacked, Vec2, NUM_BOOMS};

/// Any state component larger than this is treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Rigid-body parameters of the robot body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub mass: f64,
    /// Planar moment of inertia about the center of mass (kg·m²).
    pub inertia: f64,
    /// Gravity in the wall frame (m/s²).
    pub gravity: Vec2,
}

impl BodyParams {
    /// Standard lunar surface gravity, pointing along -y.
    pub const LUNAR_GRAVITY: f64 = 1.625;

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(format!("mass must be positive (got {})", self.mass));
        }
        if !(self.inertia > 0.0 && self.inertia.is_finite()) {
            return Err(format!("inertia must be positive (got {})", self.inertia));
        }
        Ok(())
    }

    /// Inertia of a uniform `width × height` plate.
    pub fn plate_inertia(mass: f64, width: f64, height: f64) -> f64 {
        mass * (width * width + height * height) / 12.0
    }
}

/// Body parameters plus boom layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub body: BodyParams,
    pub booms: [BoomConfig; NUM_BOOMS],
}

/// Joint efforts for all booms: prismatic force `f_b` (positive extends) and
/// revolute torque `tau_theta` (positive turns counter-clockwise).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointCommand {
    pub f_b: [f64; NUM_BOOMS],
    pub tau_theta: [f64; NUM_BOOMS],
}

impl JointCommand {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Interleaved `[f_b0, τ_θ0, f_b1, τ_θ1, ...]`.
    pub fn to_vector(&self) -> Stacked {
        Stacked::from_fn(|k, _| {
            if k % 2 == 0 {
                self.f_b[k / 2]
            } else {
                self.tau_theta[k / 2]
            }
        })
    }

    pub fn from_vector(v: &Stacked) -> Self {
        Self {
            f_b: std::array::from_fn(|i| v[2 * i]),
            tau_theta: std::array::from_fn(|i| v[2 * i + 1]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.f_b.iter().chain(&self.tau_theta).all(|c| c.is_finite())
    }
}

/// Which gait stage the robot is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    BodyMove,
    /// The given boom is detached and moving; the body is held still.
    EndEffectorMove(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub body: PlanarPose,
    /// Body twist expressed in the body frame.
    pub vel: Twist,
    pub joints: [BoomJointState; NUM_BOOMS],
    pub stage: Stage,
}

impl RobotState {
    /// State at rest with attached booms placed by inverse kinematics.
    /// Detached booms take `fallback` joint values.
    pub fn at_rest(
        body: PlanarPose,
        model: &RobotModel,
        anchors: &AnchorSet,
        fallback: [BoomJointState; NUM_BOOMS],
        stage: Stage,
    ) -> Result<Self> {
        let ik = inverse_kinematics(&body, &model.booms, anchors)?;
        let joints = std::array::from_fn(|i| ik[i].unwrap_or(fallback[i]));
        Ok(Self {
            body,
            vel: Twist::zero(),
            joints,
            stage,
        })
    }

    pub fn kinetic_energy(&self, params: &BodyParams) -> f64 {
        0.5 * params.mass * self.vel.v.norm_squared() + 0.5 * params.inertia * self.vel.w.powi(2)
    }

    /// Wall-frame linear velocity of the body.
    pub fn world_velocity(&self) -> Vec2 {
        self.body.rotation() * self.vel.v
    }

    pub fn joint_rates(&self) -> Stacked {
        Stacked::from_fn(|k, _| {
            let q = &self.joints[k / 2];
            if k % 2 == 0 {
                q.b_dot
            } else {
                q.theta_dot
            }
        })
    }
}

/// Anchor loads balancing the joint efforts, `x_i = J_i⁻ᵀ τ_i`, for every
/// attached boom. Detached booms carry no load.
pub fn contact_forces_from_torques(maps: &GraspMaps, cmd: &JointCommand) -> Result<Stacked> {
    let mut x = Stacked::zeros();
    for i in 0..NUM_BOOMS {
        if !maps.attached[i] {
            continue;
        }
        let tau = nalgebra::Vector2::new(cmd.f_b[i], cmd.tau_theta[i]);
        let sol = maps
            .jacobian_block(i)
            .transpose()
            .lu()
            .solve(&tau)
            .filter(|s| s.iter().all(|c| c.is_finite()))
            .ok_or(Error::SingularBoom { boom: Some(i) })?;
        x.fixed_rows_mut::<2>(2 * i).copy_from(&sol);
    }
    Ok(x)
}

/// Resultant body wrench (body frame) produced by joint efforts.
pub fn body_wrench_from_torques(maps: &GraspMaps, cmd: &JointCommand) -> Result<Wrench> {
    let x = contact_forces_from_torques(maps, cmd)?;
    Ok(Wrench::from_vector(&(maps.h * x)))
}

/// Body-frame acceleration under a resultant contact wrench.
pub fn body_acceleration(
    body: &PlanarPose,
    vel: &Twist,
    wrench: &Wrench,
    params: &BodyParams,
) -> Twist {
    let g_body = body.rotation().transpose() * params.gravity;
    // ω × v in the plane.
    let coriolis = vel.w * perp(&vel.v);
    Twist::new(
        wrench.f / params.mass + g_body - coriolis,
        wrench.tau / params.inertia,
    )
}

/// Body-frame `(v̇, ω̇)` during a body move.
pub fn body_forward_dynamics(
    state: &RobotState,
    maps: &GraspMaps,
    cmd: &JointCommand,
    params: &BodyParams,
) -> Result<Twist> {
    debug_assert_eq!(state.stage, Stage::BodyMove);
    let wrench = body_wrench_from_torques(maps, cmd)?;
    Ok(body_acceleration(&state.body, &state.vel, &wrench, params))
}

/// Polar point-mass accelerations `(b̈, θ̈)` of a free boom tip.
pub fn end_effector_forward_dynamics(
    q: &BoomJointState,
    f_b: f64,
    tau_theta: f64,
    mass: f64,
) -> Result<(f64, f64)> {
    if q.b <= 0.0 {
        return Err(Error::SingularBoom { boom: None });
    }
    let b_ddot = f_b / mass + q.b * q.theta_dot * q.theta_dot;
    let theta_ddot = tau_theta / (mass * q.b * q.b) - 2.0 * q.b_dot * q.theta_dot / q.b;
    Ok((b_ddot, theta_ddot))
}

/// One classical Runge–Kutta step of `y' = f(y)`.
pub fn rk4<const N: usize, F>(y: &SVector<f64, N>, dt: f64, mut f: F) -> Result<SVector<f64, N>>
where
    F: FnMut(&SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let k1 = f(y)?;
    let k2 = f(&(y + k1 * (0.5 * dt)))?;
    let k3 = f(&(y + k2 * (0.5 * dt)))?;
    let k4 = f(&(y + k3 * dt))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

fn check_divergence<const N: usize>(y: &SVector<f64, N>) -> Result<()> {
    let magnitude = y.amax();
    if !magnitude.is_finite() || y.iter().any(|c| !c.is_finite()) || magnitude > DIVERGENCE_BOUND {
        return Err(Error::IntegrationDiverged {
            magnitude: if magnitude.is_finite() { magnitude } else { f64::INFINITY },
        });
    }
    Ok(())
}

fn body_derivative(
    y: &SVector<f64, 6>,
    cmd: &JointCommand,
    model: &RobotModel,
    anchors: &AnchorSet,
    fallback: &[BoomJointState; NUM_BOOMS],
) -> Result<SVector<f64, 6>> {
    let body = PlanarPose::new(Vec2::new(y[0], y[1]), y[2]);
    let vel = Twist::new(Vec2::new(y[3], y[4]), y[5]);
    let ik = inverse_kinematics(&body, &model.booms, anchors)?;
    let joints = std::array::from_fn(|i| ik[i].unwrap_or(fallback[i]));
    let maps = grasp_maps(&body, &joints, &model.booms, anchors)?;
    let wrench = body_wrench_from_torques(&maps, cmd)?;
    let acc = body_acceleration(&body, &vel, &wrench, &model.body);
    let pdot = body.rotation() * vel.v;
    Ok(SVector::<f64, 6>::from([
        pdot.x, pdot.y, vel.w, acc.v.x, acc.v.y, acc.w,
    ]))
}

/// Advances the active stage by `dt` with RK4, holding `cmd` constant.
///
/// In a body move the attached joints are re-derived from the new body pose
/// (position by inverse kinematics, rates from the body twist), which keeps
/// every attached tip on its anchor. In an end-effector move only the free
/// boom evolves.
pub fn step(
    state: &RobotState,
    cmd: &JointCommand,
    model: &RobotModel,
    anchors: &AnchorSet,
    dt: f64,
) -> Result<RobotState> {
    debug_assert!(dt > 0.0);
    match state.stage {
        Stage::BodyMove => {
            let p = state.body.position();
            let y = SVector::<f64, 6>::from([
                p.x,
                p.y,
                state.body.angle(),
                state.vel.v.x,
                state.vel.v.y,
                state.vel.w,
            ]);
            let y1 = rk4(&y, dt, |y| body_derivative(y, cmd, model, anchors, &state.joints))?;
            check_divergence(&y1)?;
            let body = PlanarPose::new(Vec2::new(y1[0], y1[1]), y1[2]);
            let vel = Twist::new(Vec2::new(y1[3], y1[4]), y1[5]);
            let joints = slaved_joints(&body, &vel, &model.booms, anchors, &state.joints)?;
            Ok(RobotState {
                body,
                vel,
                joints,
                stage: Stage::BodyMove,
            })
        }
        Stage::EndEffectorMove(i) => {
            let q = state.joints[i];
            let mass = model.booms[i].ee_mass;
            let (f_b, tau) = (cmd.f_b[i], cmd.tau_theta[i]);
            let y = SVector::<f64, 4>::from([q.b, q.theta, q.b_dot, q.theta_dot]);
            let y1 = rk4(&y, dt, |y| {
                let q = BoomJointState {
                    b: y[0],
                    theta: y[1],
                    b_dot: y[2],
                    theta_dot: y[3],
                };
                let (b_ddot, theta_ddot) = end_effector_forward_dynamics(&q, f_b, tau, mass)
                    .map_err(|_| Error::SingularBoom { boom: Some(i) })?;
                Ok(SVector::<f64, 4>::from([y[2], y[3], b_ddot, theta_ddot]))
            })?;
            check_divergence(&y1)?;
            let mut next = *state;
            next.vel = Twist::zero();
            next.joints[i] = BoomJointState {
                b: y1[0],
                theta: y1[1],
                b_dot: y1[2],
                theta_dot: y1[3],
            };
            Ok(next)
        }
    }
}
