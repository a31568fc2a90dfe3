//! Waypoint programs and the two-stage gait state machine.
//!
//! A program is an ordered list of waypoints, each either a body pose or a
//! new anchor for one boom. Body waypoints run with all four booms anchored.
//! An end-effector waypoint releases its boom on activation, steers it to the
//! target anchor with the body held still, and re-attaches it once the tip is
//! within the thresholds. Switching is instantaneous.

use serde::{Deserialize, Serialize};

use crate::control::{BodyTarget, JointTarget};
use crate::dynamics::{RobotModel, RobotState, Stage};
use crate::frames::{angle_diff, PlanarPose, Twist};
use crate::kinematics::{boom_inverse_kinematics, grasp_maps, AnchorSet};
use crate::{Error, Result, Vec2, NUM_BOOMS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waypoint {
    Body {
        #[serde(rename = "position_m")]
        position: Vec2,
        #[serde(rename = "angle_rad", default)]
        angle: f64,
    },
    EndEffector { boom: usize, anchor: usize },
}

/// Switching thresholds. A waypoint is satisfied when every error is
/// strictly below its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    #[serde(rename = "position_m")]
    pub position: f64,
    #[serde(rename = "velocity_m_per_s")]
    pub velocity: f64,
    #[serde(rename = "angle_rad")]
    pub angle: f64,
    #[serde(rename = "angular_velocity_rad_per_s")]
    pub angular_velocity: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            position: 5e-3,
            velocity: 2e-3,
            angle: 5e-3,
            angular_velocity: 2e-3,
        }
    }
}

/// Distance of the robot from a waypoint. Angular entries are zero for
/// end-effector waypoints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WaypointError {
    pub position: f64,
    pub velocity: f64,
    pub angle: f64,
    pub angular_velocity: f64,
}

impl WaypointError {
    pub fn within(&self, t: &Thresholds) -> bool {
        self.position < t.position
            && self.velocity < t.velocity
            && self.angle < t.angle
            && self.angular_velocity < t.angular_velocity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitProgram {
    waypoints: Vec<Waypoint>,
    thresholds: Thresholds,
}

impl GaitProgram {
    /// Checks the program against the anchor list and the starting
    /// attachments, replaying every re-anchoring so that no two booms ever
    /// share an anchor.
    pub fn new(
        waypoints: Vec<Waypoint>,
        thresholds: Thresholds,
        anchors: &AnchorSet,
    ) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::invalid("waypoints", "program is empty"));
        }
        let t = &thresholds;
        for (name, v) in [
            ("position_m", t.position),
            ("velocity_m_per_s", t.velocity),
            ("angle_rad", t.angle),
            ("angular_velocity_rad_per_s", t.angular_velocity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    format!("thresholds.{name}"),
                    "must be positive and finite",
                ));
            }
        }
        let mut attached = anchors.attached();
        for (k, wp) in waypoints.iter().enumerate() {
            match *wp {
                Waypoint::Body { position, angle } => {
                    if !(position.iter().all(|c| c.is_finite()) && angle.is_finite()) {
                        return Err(Error::invalid(format!("waypoints[{k}]"), "non-finite pose"));
                    }
                }
                Waypoint::EndEffector { boom, anchor } => {
                    if boom >= NUM_BOOMS {
                        return Err(Error::invalid(
                            format!("waypoints[{k}].boom"),
                            format!("boom index {boom} out of range"),
                        ));
                    }
                    if anchor >= anchors.anchors().len() {
                        return Err(Error::invalid(
                            format!("waypoints[{k}].anchor"),
                            format!("anchor index {anchor} out of range"),
                        ));
                    }
                    if let Some(other) = (0..NUM_BOOMS)
                        .find(|&j| j != boom && attached[j] == Some(anchor))
                    {
                        return Err(Error::invalid(
                            format!("waypoints[{k}].anchor"),
                            format!("anchor {anchor} is held by boom {other}"),
                        ));
                    }
                    attached[boom] = Some(anchor);
                }
            }
        }
        Ok(Self {
            waypoints,
            thresholds,
        })
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitStatus {
    /// Active waypoint, or the program length once done.
    pub index: usize,
    pub stage: Stage,
    /// Anchor held by each boom.
    pub attached: [Option<usize>; NUM_BOOMS],
    pub done: bool,
}

impl GaitStatus {
    pub fn attached_count(&self) -> usize {
        self.attached.iter().filter(|a| a.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    Body,
    EndEffector(usize),
}

pub fn select_controller(status: &GaitStatus) -> Controller {
    match status.stage {
        Stage::BodyMove => Controller::Body,
        Stage::EndEffectorMove(i) => Controller::EndEffector(i),
    }
}

/// Status at the start of a program. Every boom must be anchored.
pub fn start(
    program: &GaitProgram,
    state: &RobotState,
    model: &RobotModel,
    anchors: &AnchorSet,
) -> Result<GaitStatus> {
    if let Some(i) = (0..NUM_BOOMS).find(|&i| !anchors.is_attached(i)) {
        return Err(Error::invalid(
            format!("booms[{i}].anchor"),
            "every boom must start anchored",
        ));
    }
    activate(0, anchors.attached(), program, state, model, anchors)
}

fn activate(
    index: usize,
    mut attached: [Option<usize>; NUM_BOOMS],
    program: &GaitProgram,
    state: &RobotState,
    model: &RobotModel,
    anchors: &AnchorSet,
) -> Result<GaitStatus> {
    let Some(wp) = program.waypoints.get(index) else {
        return Ok(GaitStatus {
            index: program.len(),
            stage: Stage::BodyMove,
            attached,
            done: true,
        });
    };
    let stage = match *wp {
        Waypoint::Body { .. } => Stage::BodyMove,
        Waypoint::EndEffector { boom, .. } => {
            attached[boom] = None;
            let held = anchors.with_attachments(attached)?;
            let maps = grasp_maps(&state.body, &state.joints, &model.booms, &held)?;
            if maps.rank() < 3 {
                return Err(Error::StanceUnstable { boom });
            }
            Stage::EndEffectorMove(boom)
        }
    };
    Ok(GaitStatus {
        index,
        stage,
        attached,
        done: false,
    })
}

/// Error of `state` with respect to the active waypoint.
pub fn waypoint_error(
    waypoint: &Waypoint,
    state: &RobotState,
    model: &RobotModel,
    anchors: &AnchorSet,
) -> WaypointError {
    match *waypoint {
        Waypoint::Body { position, angle } => WaypointError {
            position: (state.body.position() - position).norm(),
            velocity: state.world_velocity().norm(),
            angle: angle_diff(angle, state.body.angle()).abs(),
            angular_velocity: state.vel.w.abs(),
        },
        Waypoint::EndEffector { boom, anchor } => {
            let cfg = &model.booms[boom];
            let q = &state.joints[boom];
            let target = anchors.anchors()[anchor].position;
            WaypointError {
                position: (q.tip_position(&state.body, cfg) - target).norm(),
                velocity: q.tip_velocity(&state.body, &state.vel, cfg).norm(),
                angle: 0.0,
                angular_velocity: 0.0,
            }
        }
    }
}

/// One state-machine tick. If the active waypoint is satisfied the index
/// moves on by one, re-attaching a boom that just reached its anchor and
/// releasing the boom of a following end-effector waypoint. Otherwise the
/// status is returned unchanged. Done is absorbing.
pub fn advance(
    status: &GaitStatus,
    state: &RobotState,
    program: &GaitProgram,
    model: &RobotModel,
    anchors: &AnchorSet,
) -> Result<GaitStatus> {
    if status.done {
        return Ok(*status);
    }
    let wp = &program.waypoints[status.index];
    if !waypoint_error(wp, state, model, anchors).within(&program.thresholds) {
        return Ok(*status);
    }
    let mut attached = status.attached;
    if let Waypoint::EndEffector { boom, anchor } = *wp {
        attached[boom] = Some(anchor);
    }
    activate(status.index + 1, attached, program, state, model, anchors)
}

/// Set-point for a body waypoint.
pub fn body_target(waypoint: &Waypoint) -> Option<BodyTarget> {
    match *waypoint {
        Waypoint::Body { position, angle } => Some(BodyTarget::at_rest(position, angle)),
        Waypoint::EndEffector { .. } => None,
    }
}

/// Joint set-point that puts the tip of the waypoint's boom on its anchor
/// for the current body pose.
pub fn end_effector_target(
    waypoint: &Waypoint,
    body: &PlanarPose,
    model: &RobotModel,
    anchors: &AnchorSet,
) -> Result<Option<JointTarget>> {
    match *waypoint {
        Waypoint::Body { .. } => Ok(None),
        Waypoint::EndEffector { boom, anchor } => {
            let target = anchors.anchors()[anchor].position;
            let q = boom_inverse_kinematics(boom, body, &model.booms[boom], &target)?;
            Ok(Some(JointTarget {
                b: q.b,
                theta: q.theta,
                b_dot: 0.0,
                theta_dot: 0.0,
            }))
        }
    }
}

/// Applies a status change to the robot: the stage follows the status and a
/// newly released boom freezes the body in place.
pub fn apply_transition(state: &mut RobotState, status: &GaitStatus) {
    if state.stage != status.stage {
        if let Stage::EndEffectorMove(_) = status.stage {
            state.vel = Twist::zero();
        }
        state.stage = status.stage;
    }
}
