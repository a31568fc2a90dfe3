//! Planar dynamics, control and gait simulation for a four-boom anchored
//! mobile robot.
//!
//! The robot is a rigid body carrying four extendable booms. Each boom has a
//! prismatic joint (length `b`) and a revolute joint (angle `theta`, measured
//! in the body frame) and ends in a gripper that can anchor to a wall. Motion
//! alternates between two stages:
//!
//! * **body move**: all four grippers are anchored and the booms act as a
//!   parallel mechanism; a computed-torque controller drives the body pose.
//! * **end-effector move**: one gripper is released and its boom is driven to a
//!   new anchor by a joint-space PD controller while the body is held still.
//!
//! Module map:
//!
//! * [`frames`]: planar poses, twists, wrenches and frame transition matrices.
//! * [`kinematics`]: boom inverse kinematics, Jacobians and grasp maps.
//! * [`dynamics`]: body and end-effector equations of motion, RK4 stepping.
//! * [`control`]: computed-torque body control, PD end-effector control,
//!   wrench distribution with nullspace pretension, actuator clipping.
//! * [`gait`]: waypoint programs and the two-stage state machine.
//! * [`analysis`]: grip cone, factor-of-safety grids, noise and model error,
//!   the mass/response-time trade study.
//! * [`sim`]: scenario files, the run loop, traces and their writers.

pub mod analysis;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod frames;
pub mod gait;
pub mod kinematics;
pub mod sim;

pub use error::{Error, Result};

/// Number of booms on the robot.
pub const NUM_BOOMS: usize = 4;

/// Planar 2-vector used for positions, velocities and forces.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Stacked per-boom quantities: `[b_0, theta_0, b_1, theta_1, ...]` for joint
/// coordinates and `[x_0, y_0, x_1, y_1, ...]` for contact forces.
pub type Stacked = nalgebra::SVector<f64, 8>;
