#![allow(dead_code)]

use std::path::PathBuf;

use reachbot::dynamics::{BodyParams, RobotModel, RobotState, Stage};
use reachbot::frames::PlanarPose;
use reachbot::kinematics::{Anchor, AnchorSet, BoomConfig, BoomJointState};
use reachbot::sim::Scenario;
use reachbot::{Vec2, NUM_BOOMS};

pub const CORNERS: [(f64, f64); NUM_BOOMS] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).expect("scenario file");
    Scenario::from_toml_str(&text).expect("valid scenario")
}

/// 30 kg plate with shoulders at its corners.
pub fn model(gravity: Vec2) -> RobotModel {
    let booms = CORNERS.map(|(x, y)| BoomConfig {
        shoulder_offset: Vec2::new(0.15 * x, 0.10 * y),
        b_min: 0.05,
        b_max: 5.0,
        ee_mass: 1.0,
    });
    RobotModel {
        body: BodyParams {
            mass: 30.0,
            inertia: BodyParams::plate_inertia(30.0, 0.30, 0.20),
            gravity,
        },
        booms,
    }
}

/// Anchors at `(±a, ±a)` on walls `y = ±a`, boom `i` on anchor `i`.
pub fn square_anchors(a: f64) -> AnchorSet {
    let anchors = CORNERS
        .iter()
        .map(|&(x, y)| Anchor::new(Vec2::new(x * a, y * a), Vec2::new(0.0, y)))
        .collect();
    AnchorSet::new(anchors, [Some(0), Some(1), Some(2), Some(3)]).unwrap()
}

pub fn rest_state(body: PlanarPose, model: &RobotModel, anchors: &AnchorSet) -> RobotState {
    RobotState::at_rest(
        body,
        model,
        anchors,
        [BoomJointState::new(1.0, 0.0); NUM_BOOMS],
        Stage::BodyMove,
    )
    .unwrap()
}
